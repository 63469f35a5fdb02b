"""Deep operator learning of dissipative PDEs through Rayleighian minimization."""
