"""Exact vertex-algebra engine and twisted-contour integrator for affine sl_M Gaudin models.

Subpackages are organized bottom-up:

- ``rationals``: exact scalar ring (gmpy2 rationals) and small level-polynomials.
- ``ratfun``: exact bivariate rational functions with factored linear denominators,
  twist functions and twisted derivatives.
- ``tensors``: sl_M structure constants f, t and their contraction identities.
- ``vertex``: PBW states over N sites of an affine algebra, translation operator,
  n-th products, and translate recognition.
- ``states``: the quadratic and cubic Gaudin states, their zeroth products,
  regularity and symmetry checks.
- ``oper``: loop-algebra realization of the Langlands-dual affine algebra, Miura
  data, closed-form and gauge-canonicalized oper coefficients.
- ``verma``: truncated Verma modules, Fourier zero modes on the cylinder,
  Hamiltonians, and eigenvalue checks via twisted contour integrals.
- ``contour``: Pochhammer double-loop construction, branch tracking, and
  Gauss-Legendre quadrature of multivalued integrands.
- ``twopoint``: coset Virasoro and W-state checks for two sites.
- ``report`` / ``cli``: batch driver with JSON configuration and reporting.
"""

__version__ = "0.1.0"
