# coding: utf-8

# # The constant K
#
# K is the supremum over unit directions v of E max_k <k.v, eps>. It is the
# slope of the bias in sigma. For N = 2 it equals 1/sqrt(pi).

# In[1]:

import math

import numpy as np

from orbitmean.bias import estimate_h, estimate_K
from orbitmean.oracle import circle_grid_K


# In[2]:

k2 = estimate_K(2, n_mc=50_000, n_starts=5)
grid = circle_grid_K(n_mc=50_000)
print("K(2) sphere search", k2.value, "+-", k2.std_error)
print("K(2) circle grid  ", grid[0], "+-", grid[1])
print("1/sqrt(pi)        ", 1 / math.sqrt(math.pi))


# The maximising direction is proportional to (1, -1).

# In[3]:

print(k2.argmax_direction)


# For larger N the spike is a good direction but not the best one.

# In[4]:

n = 16
spike = np.zeros(n)
spike[0] = 1.0
print("h(spike)", estimate_h(spike, np.zeros(n), 1.0, 20_000, seed=0))
kn = estimate_K(n, n_mc=20_000, n_starts=5)
print("K(16)   ", kn.value, "+-", kn.std_error)
