"""Cross-tokenizer likelihood scoring for BPE vocabularies.

Exact and approximate sequence likelihoods for BPE-encoded text under a
language model whose native tokenizer differs from the target tokenizer:
full-to-subset marginalization with O(1)-per-token sampling, the signed
subset-to-full recursion with a beam-search approximation, plus the
distillation losses that consume the resulting probabilities.
"""

from .codec import (
    Encoding,
    decode,
    demerge_step,
    encode,
    encoding,
    is_valid,
    merge_step,
    relative_decode,
    relative_encode,
    token_expansion,
)
from .convert_down import (
    PrefixMatrix,
    SubtokenSamplerState,
    advance,
    build_prefix_matrix,
    init_sampler,
    next_subtoken_dist,
    next_subtoken_masses,
    sample_subtokens,
    score_subset,
    score_subset_log,
)
from .convert_up import (
    StopSet,
    collect_leaves,
    convert_prob_approx,
    convert_prob_exact,
    evaluate_leaves,
    expand_signed_leaves,
    sample_token_rejection,
)
from .cover import CoverEntry, CoverSet, relative_cover_search, token_prefix_index
from .lm import (
    ExternalLogitsLm,
    LmBackend,
    NgramByteLm,
    TableLm,
    uniform_byte_lm,
)
from .losses import (
    SoftLabelStep,
    combine_with_sft,
    kl_loss,
    pkl_grad,
    pkl_loss,
)
from .oracle import (
    EnumerationBudget,
    OracleResult,
    oracle_conversion_prob,
    oracle_cover_set,
)
from .vocab import (
    EOS,
    EOS_ID,
    BpeVocab,
    MergeRule,
    SubsetView,
    Token,
    build_vocab,
    export_merges,
    import_merges,
    subset_view,
    write_vocab,
)

__version__ = "0.1.0"
