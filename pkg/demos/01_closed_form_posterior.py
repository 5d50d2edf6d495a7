# %% [markdown]
# # Closed-form posteriors over a token dataset
#
# With a uniform source and a finite dataset, the posterior over the clean
# sequence given a noisy one is a mixture over dataset rows. Each row is
# weighted by `gamma ** -hamming(row, z)`, where
# `gamma = (1 + (K - 1) kappa) / (1 - kappa)`. Nothing is learned.

# %%
import numpy as np

from catflow import DatasetStore, Scheduler
from catflow.kernel import hamming_profile, log_gamma, posterior_weights
from catflow.velocity import denoiser_forward, noise_predictor, oracle_denoiser, velocity_backward

ds = DatasetStore(np.array([[0, 0], [0, 1]]), K=2)
z = np.array([0, 0])

# %% [markdown]
# At `kappa = 0.5` and `K = 2`, gamma is 3. The row at distance 0 gets three
# times the weight of the row at distance 1.

# %%
h = hamming_profile(ds, z)
print("hamming profile", h)
print("weights", posterior_weights(h, log_gamma(0.5, 2)))

# %%
print("denoiser\n", denoiser_forward(ds, z, 0.5).values)
print("brute-force enumeration\n", oracle_denoiser(ds, z, 0.5).values)

# %% [markdown]
# The noise predictor reuses the same weights. It needs only the mass `s_i`
# of rows that agree with `z` at each position.

# %%
print("noise predictor\n", noise_predictor(ds, z, 0.5).values)
print("backward velocity at t=0.5\n", velocity_backward(ds, z, 0.5, Scheduler()).values)

# %% [markdown]
# At `kappa = 1`, gamma is infinite. The weights fall uniformly on the
# nearest rows, and every other row gets exactly zero.

# %%
print(posterior_weights(np.array([2, 1, 1]), log_gamma(1.0, 2)))
