"""Constraint-based structure learning benchmarked across graph topologies.

The package couples a small causal-graph toolkit (preferential-attachment
DAG generation, structural-equation simulation, conditional-independence
tests, and three constraint-based learners) with a deterministic benchmark
harness that scores how well each learner recovers edges as the underlying
topology sweeps from chain-like to hub-dominated.
"""

from .bench import (
    ExperimentConfig,
    PairwiseComparison,
    RunRecord,
    TopologyRegime,
    compare_topologies,
    derive_run_seed,
    emit_csv,
    emit_pvalues_csv,
    load_config,
    parse_csv,
    run_grid,
)
from .citests import (
    CiResult,
    CiTestKind,
    DSeparationOracle,
    FisherZTester,
    MiGaussianTester,
    chi2_upper_tail,
    correlation_matrix,
    fisher_z_test,
    mi_gaussian_test,
    normal_upper_tail,
    partial_correlation,
)
from .evaluation import (
    BoxplotSummary,
    ConfusionCounts,
    WilcoxonResult,
    boxplot_summary,
    compare_edges,
    evaluate_run,
    learned_adjacency,
    normalize_eval_mode,
    reference_graph,
    sensitivity,
    specificity,
    wilcoxon_rank_sum,
)
from .graphs import (
    CycleError,
    Dag,
    DegreeHistogram,
    GraphError,
    Pdag,
    UndirectedGraph,
    cpdag_of_dag,
    d_separated,
    graph_from_text,
    graph_to_text,
    in_degree_histogram,
    meek_closure,
    moralize,
    moralize_pdag,
    read_graph,
    skeleton,
    to_dot,
    topological_order,
    write_graph,
)
from .learners import (
    ALGORITHMS,
    LearnParams,
    OrientationCounters,
    fast_iamb_mb,
    grow_shrink_mb,
    learn_structure,
    mb_based_learn,
    orient_v_structures,
    pc_stable,
)
from .plots import emit_plots, render_box_panel, render_pvalue_scatter
from .rng import derive_seed, make_generator
from .sem import (
    DataMatrix,
    SemSpec,
    apply_sem,
    read_data_csv,
    sigmoid,
    simulate_dataset,
    write_data_csv,
)
from .topology import TopologySpec, attachment_weights, generate_pa_dag

__version__ = "0.1.0"
