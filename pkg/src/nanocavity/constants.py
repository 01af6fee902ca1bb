"""Physical constants and default material parameters (SI)."""

from types import MappingProxyType

from scipy import constants as _sc

C = _sc.c  # exact, 299 792 458 m/s
AMU = 1.66054e-27  # kg

# relative permittivity at 1547 nm, density in kg/m^3
MATERIALS = MappingProxyType({
    "silica": MappingProxyType({"permittivity": 2.07, "density": 2200.0}),
    "silicon": MappingProxyType({"permittivity": 12.1, "density": 2329.0}),
})
