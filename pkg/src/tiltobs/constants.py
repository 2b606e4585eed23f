"""Shared numeric constants.

Tolerances are split in two tiers: CONSTRUCTION_TOL guards invariants that
must hold after building a value (unit norm, orthonormality), ARITHMETIC_TOL
guards pointwise algebraic identities checked in tests.
"""

# standard gravity, m/s^2
GRAVITY = 9.81

# max deviation tolerated right after constructing a constrained value
CONSTRUCTION_TOL = 1e-9

# max deviation tolerated for pointwise algebraic identities
ARITHMETIC_TOL = 1e-12
