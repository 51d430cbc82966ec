"""ordopt: sort-order-aware cost-based query optimization plus a simulated
external sort that exploits partially sorted input."""

from .catalog_stats import (
    BlockConfig,
    Catalog,
    CatalogRelation,
    IndexDef,
    blocks,
    covering_indices,
    distinct_count,
    expr_blocks,
    expr_stats,
    load_catalog,
)
from .cost_model import (
    CostParams,
    access_paths,
    enforce_cost,
    full_sort_cost,
    load_params,
    operator_cost,
    partial_sort_cost,
    sort_cpu_cost,
)
from .errors import (
    ConfigError,
    DuplicateAttribute,
    NotAPrefix,
    OrdoptError,
    ParseError,
    TooLarge,
    UnknownAttribute,
    UnknownRelation,
    UnknownStatistic,
    Unsatisfiable,
    UnsortedPrefix,
    ValidationError,
)
from .extsort import Record, SortMetrics, SortSpec, gen_segmented_input, sort_mrs, sort_srs
from .favorable_orders import (
    FavorableOrderIndex,
    exact_minimal_favorable_orders,
    index_for_query,
    restrict_orders,
)
from .logical_expr import (
    AGG_ATTR,
    GroupBy,
    Join,
    LogicalExpr,
    Project,
    QuerySpec,
    Scan,
    Select,
    parse_query,
    query_attrs,
    query_to_dict,
    schema,
)
from .optimizer import (
    HEURISTICS,
    Optimizer,
    PhysicalPlan,
    format_plan,
    interesting_orders,
    load_plan_document,
    optimize_query,
    plan_document,
)
from .oracle import OracleGuard, brute_best_plan, brute_tree_benefit, reference_sort
from .order_algebra import (
    EMPTY,
    AttrSet,
    SortOrder,
    canonical_permutation,
    concat,
    is_prefix,
    lcp,
    lcp_with_set,
    order,
    subtract,
)
from .order_refinement import (
    LabeledTree,
    assignment_benefit,
    join_prefix_benefit,
    path_order,
    refine_plan,
    tree_approx,
)

__version__ = "0.1.0"
