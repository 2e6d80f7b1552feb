"""Staircase, candidate-set and proxy-set geometry for multi-attribute nearest-site queries."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    DimensionError, LiftedPlane, PlanePoint, Site, SiteSet, SiteSetError, dist, dist2, dominates, lift, lift_all,
    load_site_set, point_volume, save_site_set, volume_ordering,
)
from .staircase import EmptyInputError, PointCloud, StaircaseResult, orthogonal_hull_points, staircase  # noqa: E402
from .random_model import ConfigError, DistributionSpec, sample_site_set, substream, v_delta, v_delta_mc  # noqa: E402
from .backward import Property, TailConfig, backward_run, quicksort_comparisons, tail_probability  # noqa: E402
from .candidate import (  # noqa: E402
    CandidateSet, ProxySet, StarPolygon, candidate_set, containment_violations, env_membership,
    k_environment_polygon, proxy_overlay_complexity, proxy_set,
)
from .arrangement import (  # noqa: E402
    AmbiguousLocation, DegeneracyWarning, Line, PlanarSubdivision, bisector, build_arrangement, candidate_diagram,
    kth_order_cells, point_locate,
)
from .levels import (  # noqa: E402
    LineLevelEdge, MomentReport, PlaneArrangementVertex, below_conflict_sizes, edges_on_line_at_level,
    enumerate_plane_vertices, incremental_k_level_vertices, k_level_edges_lines, moment_experiment,
    point_level_lines,
)
