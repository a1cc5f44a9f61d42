"""KL-regularized fair matrix factorization."""
