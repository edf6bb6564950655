# coding: utf-8

# # Registering signals under circular shifts
#
# A shift `k` acts on a signal by `out[j] = x[(j + k) mod N]`. Registering `y`
# onto `x` means finding the shift that brings `y` closest to `x`.

# In[1]:

import numpy as np

from orbitmean.group import Shift, apply, orbit, register_exhaustive, register_fft
from orbitmean.quotient import quotient_distance


# A spike at index 0 against a spike at index 3. Shifting the second one by 3
# moves it back onto the first.

# In[2]:

x = np.array([1.0, 0, 0, 0])
y = np.array([0, 0, 0, 1.0])
print(orbit(y))
print(register_exhaustive(x, y))


# The FFT path computes all N inner products at once through the circular
# cross-correlation. It agrees with brute force.

# In[3]:

rng = np.random.default_rng(0)
x = rng.standard_normal(64)
y = apply(Shift(17, 64), x) + 0.1 * rng.standard_normal(64)
reg = register_fft(x, y)
print(reg.element, reg.distance, reg.margin, reg.unique)
print(register_exhaustive(x, y).element)


# The quotient distance ignores the shift entirely.

# In[4]:

print(np.linalg.norm(x - y), quotient_distance(x, y))


# Constant signals are fixed by every shift, so their registration is never
# unique.

# In[5]:

print(register_fft(np.ones(8), rng.standard_normal(8)).unique)
