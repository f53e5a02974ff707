from .builder import SINK, SOURCE, Builder, GadgetBlueprint, apply_gadget, instantiate_standalone
from .blueprints import (
    bp_comparison,
    bp_constant,
    bp_cutoff,
    bp_difference,
    bp_inverter,
    bp_nand,
    bp_or,
    bp_reset,
    bp_scaling,
    bp_sum,
    bp_zero_one,
    comparison_level,
)
from .reductions import (
    BooleanCircuit,
    CompiledArtifact,
    DestroyerBanks,
    attach_sat_destroyer,
    compile_boolean,
    compile_gcircuit,
    destroyer_parameters,
    destroyer_slice,
    embed_gc_solution,
    eval_gadget_forward,
    extract_discrete,
    node_bank,
    reduce_sat,
    witness_boolean,
)
from .enclosure import AllowedSet, Enclosure, allowed_set, enclose, enclose_split, refute_region, sample_eps_solution
