"""Mean curvature flow of geodesic graphs in Fuchsian 3-manifolds.

Modules: ``hyp_base`` (disk model, octagon group, Fermi chart), ``ambient`` (warped
metric dr^2 + cosh^2 r g0), ``graph_geometry`` (pointwise graph geometry), ``identity_lab``
(identity residuals), ``comparison_ode`` (barriers and angle bounds), ``flow_engine``
(time stepping and monitors), ``cli_io`` (command line and emission).
"""

__version__ = "0.1.0"
