"""Full Bayesian Significance Test (FBST) for conditional independence of
discrete variables.

The test decomposes H: Y independent of Z given X into one independence
hypothesis per conditioning slice, computes an e-value for each slice from
the Dirichlet-multinomial posterior, and composes them through numerical
Mellin convolution of truth functions with bound-producing condensation.
"""

from .errors import DomainError, FbstCiError, ParseError, SchemaError
from .tables import (
    ContingencyTable,
    CptModel,
    Dataset,
    contingency_slices,
    emit_csv,
    ingest_csv,
    load_cpt_model,
    sample_dataset,
)
from .posterior import (
    ConstrainedMap,
    DirichletPosterior,
    SimplexPoint,
    constrained_map,
    from_table,
    log_density,
    sample,
    sample_log_densities,
)
from .truthfn import (
    AXIS_BOTH,
    AXIS_HORIZONTAL,
    AXIS_VERTICAL,
    TruthFunction,
    elementary_evalue,
    estimate_truth_function,
    format_truth_tsv,
    read_truth_tsv,
    truth_function_from_log_densities,
    write_truth_tsv,
)
from .convolution import (
    RawConvolution,
    composite_evalue,
    condense_horizontal,
    condense_vertical,
    convolve,
    lognormal_reference,
)
from .fbst import (
    CiTestRun,
    CiTestSpec,
    EvalueReport,
    SliceResult,
    ci_test,
    ci_test_from_tables,
    run_ci_test,
    run_ci_test_from_tables,
)

__version__ = "0.1.0"

__all__ = [
    "AXIS_BOTH",
    "AXIS_HORIZONTAL",
    "AXIS_VERTICAL",
    "CiTestRun",
    "CiTestSpec",
    "ConstrainedMap",
    "ContingencyTable",
    "CptModel",
    "Dataset",
    "DirichletPosterior",
    "DomainError",
    "EvalueReport",
    "FbstCiError",
    "ParseError",
    "RawConvolution",
    "SchemaError",
    "SimplexPoint",
    "SliceResult",
    "TruthFunction",
    "ci_test",
    "ci_test_from_tables",
    "composite_evalue",
    "condense_horizontal",
    "condense_vertical",
    "constrained_map",
    "contingency_slices",
    "convolve",
    "elementary_evalue",
    "emit_csv",
    "estimate_truth_function",
    "format_truth_tsv",
    "from_table",
    "ingest_csv",
    "load_cpt_model",
    "log_density",
    "lognormal_reference",
    "read_truth_tsv",
    "run_ci_test",
    "run_ci_test_from_tables",
    "sample",
    "sample_dataset",
    "sample_log_densities",
    "truth_function_from_log_densities",
    "write_truth_tsv",
]
