# coding: utf-8

# # Max-max on a step template
#
# Observations are randomly shifted copies of a step plus Gaussian noise with
# sigma = 10, far above the template norm of 4. The max-max estimate ends up
# with a lower empirical variance than the template itself, which is the
# inconsistency in action.

# In[1]:

import numpy as np

from orbitmean.bias import oracle_mean_known_transforms
from orbitmean.maxmax import run_maxmax, verify_karcher
from orbitmean.model import TemplateSpec, make_template, sample_dataset
from orbitmean.quotient import empirical_variance, prepare, quotient_distance


# In[2]:

t0 = make_template(TemplateSpec())
ds = sample_dataset(t0, sigma=10.0, size=20_000, seed=1)
p = prepare(ds)
res = run_maxmax(p)
print("converged", res.converged, "after", res.steps, "steps")


# In[3]:

print("F_I(template)", empirical_variance(t0, p))
print("F_I(estimate)", empirical_variance(res.estimate, p))


# The empirical bias is the quotient distance from the template to the
# estimate. Averaging with the true shifts instead (the oracle) stays close.

# In[4]:

print("EB/sigma     ", quotient_distance(t0, res.estimate) / 10)
print("oracle/sigma ", quotient_distance(t0, oracle_mean_known_transforms(ds)) / 10)


# Every registration at the estimate is unique and small perturbations do not
# lower the variance, so it is a local minimum.

# In[5]:

cert = verify_karcher(res.estimate, p, n_perturb=20)
print(cert.all_unique, cert.n_passed, "/", cert.n_perturb, "radius", cert.perturbation_radius)


# The convergence trace: variance per step and how many registrations moved.

# In[6]:

for n in range(0, res.steps + 1, max(res.steps // 10, 1)):
    print(n, res.variance_history[n], res.changed_history[n])
