"""critflow: critical points of curves and surface germs under
curvature-driven flows.

Subpackages:
    geometry_core   polar curves, spectral derivatives, critical points
    flow_engine     time evolution under v(kappa) laws, event detection
    saddle_node_mc  3D saddle-node germ formulas and Monte Carlo sign law
    markov_model    N(t) Markov chain, noise model, delta(d) minimization
    pentagon_lab    Eikonal polygon engine and pentagon phase-space maps
    cli             batch command-line front end
"""

__version__ = "0.1.0"
