"""Hyperbolic spin Calogero-Moser systems and spin Toda lattices.

Core layers:

* ``liealg``   -- root systems, Chevalley bases, invariant form, bracket
* ``dynr``     -- the hyperbolic dynamical r-matrix family and its verifiers
* ``poisson``  -- Lie-Poisson brackets and Hamiltonian vector fields at points
* ``models``   -- Hamiltonians, equations of motion, Lax operators, reductions
* ``factor``   -- exact solvers via group factorization
* ``numint``   -- fixed-step RK4 oracle and invariant monitors

Front ends: ``spincm.service`` (FastAPI app) and ``spincm.cli`` (thin client).
"""

__version__ = "0.1.0"
