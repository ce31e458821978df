"""covar-sim — eigenstates of local Hamiltonians by covariance root finding.

A vector of covariances ``f_k = <O_k H> - <O_k><H>`` between sampled Pauli
strings and the problem Hamiltonian vanishes exactly at eigenstates. The
solver drives a large random sample of them to a joint root with a
stochastic Levenberg-Marquardt iteration, estimating expectations exactly,
under synthetic noise, or from classical shadows.
"""

__version__ = "0.1.0"
