"""Organizational coupling between microservices, mined from commit histories."""

from .coupling import (
    Band,
    CouplingMatrix,
    DeveloperCoupling,
    SwitchSequence,
    classify,
    count_switches,
    coupling_matrix,
    developer_oc,
    harmonic_mean,
    pair_sequence,
    switch_weight,
)
from .evolution import EvolutionSeries, WindowSpec, series_delta, windowed_matrices
from .history import (
    UNMAPPED,
    CommitRecord,
    FileChange,
    History,
    ServiceMap,
    ServiceRule,
    canonicalize_identity,
    extract_from_git,
    load_aliases,
    load_history,
    load_service_map,
    read_commit_log,
    resolve_service,
    write_commit_log,
)
from .ownership import (
    ContributionLedger,
    OwnershipProfile,
    Role,
    build_ledger,
    ownership_profile,
    team_members,
)

__version__ = "0.1.0"
