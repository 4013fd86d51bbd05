"""Potential theory and branching interlacements for branching Markov chains.

The heavy lifting lives in the compiled `_core` module; this package re-exports
its surface. Regions are lists of state names (an empty list means the model's
default region) and measures are numpy vectors in ``model.states`` order.
"""

from spinney._core import (
    AnchoredPath,
    AnchoredPathSampler,
    CriterionRow,
    DecorabilityReport,
    Forest,
    InterlacementSample,
    Model,
    SamplerCaps,
    TestReport,
    anchored_markov_test,
    criteria_report,
    decorability_advisory,
    decorability_constant,
    entrance_measure,
    excessive_to_occupation,
    h_function,
    hit_probability_bounds,
    interlacement_occupation_test,
    is_excessive,
    load_model,
    model_text,
    occupation_to_excessive,
    riesz_decomposition,
    run_acceptance,
    sample_biased_forest,
    sample_forest,
    sample_interlacement,
    sample_spine,
    spine_identity_test,
    taboo_return_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "AnchoredPath",
    "AnchoredPathSampler",
    "CriterionRow",
    "DecorabilityReport",
    "Forest",
    "InterlacementSample",
    "Model",
    "SamplerCaps",
    "TestReport",
    "anchored_markov_test",
    "criteria_report",
    "decorability_advisory",
    "decorability_constant",
    "entrance_measure",
    "excessive_to_occupation",
    "h_function",
    "hit_probability_bounds",
    "interlacement_occupation_test",
    "is_excessive",
    "load_model",
    "model_text",
    "occupation_to_excessive",
    "riesz_decomposition",
    "run_acceptance",
    "sample_biased_forest",
    "sample_forest",
    "sample_interlacement",
    "sample_spine",
    "spine_identity_test",
    "taboo_return_kernel",
]
