from swarmgrid.harness.config import DuplicateKey, ParseError, RunConfig, parse_config, read_config
from swarmgrid.harness.runner import (
    Comparison,
    Hybrid,
    RunRecord,
    SpeedupRow,
    UnknownMethod,
    build_optimizer,
    compare,
    load_presets,
    run_once,
    speedup,
    speedup_rows,
)
