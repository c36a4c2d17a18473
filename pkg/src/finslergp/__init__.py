"""Stochastic pullback geometry for Gaussian-process latent spaces.

Equips the latent space of a GP generative model with two deterministic
metrics derived from the stochastic pullback metric G = J^T J: the expected
Riemannian metric sqrt(v^T E[G] v) and the Finsler metric E[sqrt(v^T G v)],
which has a closed form. Provides geodesics, indicatrices, volume measures,
and Monte-Carlo verification of the bounds relating the two.
"""

__version__ = "0.1.0"
