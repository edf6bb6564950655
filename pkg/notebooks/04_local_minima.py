# coding: utf-8

# # Several starts, several answers
#
# Max-max only finds a local minimum. Starting it from means of randomly
# shifted observations lands on different fixed points.

# In[1]:

import numpy as np

from orbitmean.maxmax import multi_start
from orbitmean.model import TemplateSpec, make_template, sample_dataset
from orbitmean.oracle import brute_force_frechet
from orbitmean.quotient import prepare, variance_difference


# In[2]:

t0 = make_template(TemplateSpec())
ds = sample_dataset(t0, 10.0, 2000, seed=1)
p = prepare(ds)
runs = multi_start(p, n_starts=10, rng_seed=0)
for r in runs:
    print(r.start_id, round(r.variance, 6), r.steps)


# Differences between final variances, with paired standard errors.

# In[3]:

best = runs[0]
for r in runs[1:4]:
    d = variance_difference(r.estimate, best.estimate, p)
    print(r.start_id, d.value, "+-", d.std_error)


# On a tiny instance the global minimum can be found by enumeration, and no
# start beats it.

# In[4]:

Y = np.random.default_rng(3).standard_normal((3, 5))
m, f, shifts = brute_force_frechet(Y)
print("global", f, shifts)
print("starts", sorted({round(r.variance, 12) for r in multi_start(Y, 20)}))
