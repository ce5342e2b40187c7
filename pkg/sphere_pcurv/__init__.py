"""
Sphere p-curvature - discrete p-curvature of curves on the unit sphere.

Inscribed geodesic polygonals, constant-curvature bends glued into their
corners, the resulting p-rotation and the studies comparing it with the
integral of |k|^p.
"""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("sphere-pcurv")
except PackageNotFoundError:
    __version__ = "dev"
