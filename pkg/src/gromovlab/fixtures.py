"""Built-in model domains and polynomial domain construction."""
from __future__ import annotations

import numpy as np

from .domain import AlmostComplexStructure, DefiningFunction, Domain, DomainError

# name -> (complex dim, rho, half-width of box, collar_eps, witness, oracle, region)
_TABLE = {
    "disk": (1, "x1**2 + y1**2 - 1", 1.25, 0.1, None, "ball", True),
    "ball2": (2, "x1**2 + y1**2 + x2**2 + y2**2 - 1", 1.25, 0.1, None, "ball", True),
    "ellipsoid": (2, "x1**2 + y1**2/2 + 2*x2**2 + y2**2 - 1", 1.6, 0.07, None, None, True),
    # |z1|^2 + |z2|^2 + 2 Re(z2^2) - 1: strictly psh, index-1 critical point
    "indexed_psh": (2, "x1**2 + y1**2 + 3*x2**2 - y2**2 - 1", 1.5, 0.1, None, None, True),
    # two boundary spheres, radii 1 and 2; not psh
    "two_shell": (2, "(x1**2 + y1**2 + x2**2 + y2**2 - 1)*(x1**2 + y1**2 + x2**2 + y2**2 - 4)",
                  2.5, 0.1, [1.5, 0, 0, 0], None, True),
    # Hessian index 3 > n = 2 at the origin; Levi form indefinite
    "index3": (2, "x1**2 - 2*y1**2 - 2*x2**2 - 2*y2**2 - 1", 1.5, 0.1, None, None, True),
    "degenerate": (1, "x1**4 + y1**2 - 1", 1.3, 0.1, None, None, True),
    "cubic_ball": (2, "x1**2 + y1**2 + x2**2 + y2**2 - 1 + x1**3/10", 1.4, 0.1, None, None, True),
}

FIXTURES = tuple(sorted(_TABLE)) + ("ball2_twisted",)


def polynomial_domain(expr: str, n: int, box, collar_eps: float, witness=None,
                      J: AlmostComplexStructure | None = None, name: str = "custom",
                      oracle=None, region: bool = True) -> Domain:
    rho = DefiningFunction.from_sympy(expr, n)
    if witness is None:
        witness = np.zeros(2 * n)
    return Domain(rho=rho, J=J or AlmostComplexStructure.standard(n), box=box,
                  collar_eps=collar_eps, witness=witness, name=name, oracle=oracle,
                  region=region)


def _twist(P, amp=0.1):
    # small polynomial perturbation A(p) - I for a non-integrable-looking J
    P = np.asarray(P, float)
    E = np.zeros(P.shape[:-1] + (4, 4))
    E[..., 0, 2] = amp * P[..., 1]
    E[..., 1, 3] = amp * P[..., 0]
    E[..., 2, 0] = amp * P[..., 3] * P[..., 2]
    E[..., 3, 1] = -amp * P[..., 0]
    return E


def get_fixture(name: str, collar_eps: float | None = None, audit: bool = False) -> Domain:
    if name == "ball2_twisted":
        J = AlmostComplexStructure.conjugated(2, _twist, audit=audit, name="twisted")
        return polynomial_domain(_TABLE["ball2"][1], 2, ([-1.25] * 4, [1.25] * 4),
                                 collar_eps or 0.1, J=J, name=name)
    try:
        n, expr, w, eps, wit, oracle, region = _TABLE[name]
    except KeyError:
        raise DomainError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None
    box = ([-w] * (2 * n), [w] * (2 * n))
    return polynomial_domain(expr, n, box, collar_eps or eps, witness=wit, name=name,
                             oracle=oracle, region=region)
