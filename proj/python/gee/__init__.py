"""Explanation-indexed demonstration retrieval for few-shot GEC."""

from ._core import (
    Database,
    EditSpan,
    Sample,
    __version__,
    apply_edits,
    build_database,
    embed,
    evaluate_parallel,
    extract_edits,
    f_half_score,
    filter_samples,
    normalize_text,
    parse_parallel_file,
    predict_batch,
    prompt_names,
    render_prompt,
    split_by_correctness,
    token_mode_for_language,
    tokenize,
)

__all__ = [
    "Database",
    "EditSpan",
    "Sample",
    "__version__",
    "apply_edits",
    "build_database",
    "embed",
    "evaluate_parallel",
    "extract_edits",
    "f_half_score",
    "filter_samples",
    "normalize_text",
    "parse_parallel_file",
    "predict_batch",
    "prompt_names",
    "render_prompt",
    "split_by_correctness",
    "token_mode_for_language",
    "tokenize",
]
