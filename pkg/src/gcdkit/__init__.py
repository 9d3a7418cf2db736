"""Grammar-constrained decoding toolkit.

Compile a byte-level context-free grammar once, then query the exact set
of admissible next tokens for any tokenizer vocabulary at every decoding
step.  Ships input-dependent grammar builders for triplet extraction,
entity disambiguation, and constituency parsing, a constrained
greedy/beam decoder over pluggable scorers, task metrics, and a latency
benchmark harness.
"""

from .bench import LatencyReport, measure_overhead
from .decode import (
    BigramScorer,
    DecodeConfig,
    DecodeError,
    EmptyStringReport,
    Hypothesis,
    RandomScorer,
    ReplayScorer,
    Scorer,
    UniformScorer,
    constrained_beam,
    constrained_greedy,
    empty_string_report,
    length_normalized_score,
    ngram_scorer,
    replay_scorer,
    uniform_scorer,
)
from .earley import (
    InvalidGrammarError,
    ParserState,
    accepts,
    advance,
    allowed_bytes,
    init,
    is_complete,
    is_viable,
)
from .grammar import (
    Catalog,
    CatalogError,
    Diagnostic,
    Grammar,
    GrammarError,
    GrammarSyntaxError,
    LexSet,
    Nonterminal,
    Rule,
    Terminal,
    load_catalog,
    parse_grammar,
    print_grammar,
    validate,
)
from .mask import (
    MaskError,
    TokenGrammar,
    TokenMask,
    TokenNotAllowedError,
    TokenizeError,
    advance_token,
    compile_token_grammar,
    compute_mask,
    greedy_tokenize,
    set_mask_cache,
    token_grammar_mask,
)
from .metrics import (
    BracketScore,
    BracketTree,
    MetricsError,
    ValidityResult,
    bracket_spans,
    bracketing_prf,
    check_validity,
    cie_prf,
    ed_accuracy,
    linearize_triplets,
    parse_bracket_tree,
    parse_triplets,
    strip_function_tags,
)
from .templates import (
    DEFAULT_CP_LABELS,
    DEFAULT_MARKERS,
    CieSchema,
    CpInstance,
    EdInstance,
    TemplateError,
    build_cie_grammar,
    build_cp_grammar,
    build_cp_iig_grammar,
    build_ed_grammar,
    expand_labels,
    extract_ed_entity,
    load_instance,
)
from .vocab import (
    TrieNode,
    VocabError,
    Vocabulary,
    build_vocabulary,
    detokenize,
    dump_vocab,
    load_vocab,
)

__version__ = "0.1.0"
