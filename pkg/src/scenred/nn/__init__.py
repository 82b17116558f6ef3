from .autodiff import Tensor, concat, grad, matmul, minimum, stack
from .checkpoint import checkpoint_text, load_checkpoint, save_checkpoint
from .policy import (DecodeTrace, EncodedInstance, NetConfig, PolicyParams, critic_value,
                     decode_sequence, decoder_step, encode, gcn_layer, policy_inputs,
                     sequence_log_prob, standardize_rows, step_logits, update_aux)

__all__ = ["DecodeTrace", "EncodedInstance", "NetConfig", "PolicyParams", "Tensor", "checkpoint_text",
           "concat", "critic_value", "decode_sequence", "decoder_step", "encode", "gcn_layer", "grad",
           "load_checkpoint", "matmul", "minimum", "policy_inputs", "save_checkpoint", "sequence_log_prob",
           "stack", "standardize_rows", "step_logits", "update_aux"]
