"""Session contract toolkit.

Parse client/server session contracts, decide strong and skip-compliance
(the latter with two independent engines), decide the induced server
substitutability preorder via dual contracts, and serve a contract registry
that answers client queries from a precomputed preorder index.
"""

from .errors import (
    ContractError,
    DuplicateBranch,
    NotClosed,
    ParseError,
    ResourceLimit,
    StoreError,
    UnguardedRec,
    ValidationError,
)
from .syntax import (
    DONE,
    Behaviour,
    Done,
    ExtChoice,
    IntChoice,
    Rec,
    Var,
    contract,
    canonicalize,
    dual,
    gen_random,
    parse,
    render,
    substitute,
    unfold,
    validate,
)
from .lts import (
    ActionLabel,
    BehaviourStep,
    NormalForm,
    StateGraph,
    Trace,
    converge,
    reachable,
    step,
    syncable,
    traces,
)
from .product import (
    Lasso,
    ProductGraph,
    ProductStep,
    SyncTrace,
    build_product_graph,
    definitely_skp_cycle,
    product_step,
    seq_embed,
    sync_traces,
)
from .compliance import (
    DerivationNode,
    StuckWitness,
    Verdict,
    check_skp,
    check_strong,
    derivation_from_json,
    derivation_to_json,
    derive,
    replay_witness,
    verdict_to_json,
)
from .preorder import SubVerdict, enumerate_clients, minimal_server, subbehaviour
from .registry import ContractRecord, ContractStore, PreorderIndex, make_http_server

__version__ = "0.1.0"
