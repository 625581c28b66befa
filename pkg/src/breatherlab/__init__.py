"""breatherlab: exact verification of quasimonochromatic breather algebra
for gKdV/ZK flows, plus a numeric catalog of closed-form breathers and a
pseudo-spectral integrator."""

__version__ = "0.1.0"
