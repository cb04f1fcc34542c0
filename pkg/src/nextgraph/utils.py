"""Seeded parameter initialization and JSON checkpoints for torch modules."""

import json
import math

import numpy as np
import torch

from .errors import DataError


def seeded_generator(seed):
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    return gen


def init_parameters(module, seed):
    """Re-initialize every parameter from a seed, independent of build order.

    Parameters are visited in sorted-name order and filled uniformly from
    [-1/sqrt(fan), 1/sqrt(fan)], so the same architecture and seed always
    produce identical weights.
    """
    gen = seeded_generator(seed)
    for _, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        fan = p.shape[-1] if p.dim() > 1 else p.shape[0]
        bound = 1.0 / math.sqrt(max(fan, 1))
        with torch.no_grad():
            p.uniform_(-bound, bound, generator=gen)


def module_state_json(module):
    """Serialize a module's state as JSON with shape headers, sorted keys."""
    payload = {}
    for name, tensor in module.state_dict().items():
        arr = tensor.detach().cpu().numpy()
        payload[name] = {
            "shape": list(arr.shape),
            "data": [float(x) for x in arr.reshape(-1)],
        }
    return json.dumps(payload, sort_keys=True)


def save_checkpoint(module, path):
    with open(path, "w") as fh:
        fh.write(module_state_json(module))


def read_json_file(path):
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc))
    with fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError("invalid JSON in %s: %s" % (path, exc))


def load_checkpoint(module, path):
    apply_state(module, read_json_file(path))


def apply_state(module, obj):
    """Load a parsed parameter map into the module, checking names and shapes."""
    current = module.state_dict()
    state = {}
    for name, entry in obj.items():
        if name not in current:
            raise DataError("checkpoint has unknown parameter %r" % name)
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if list(arr.shape) != list(current[name].shape):
            raise DataError(
                "checkpoint shape %s does not match %s for %r"
                % (list(arr.shape), list(current[name].shape), name)
            )
        state[name] = torch.as_tensor(arr, dtype=current[name].dtype)
    missing = set(current) - set(state)
    if missing:
        raise DataError("checkpoint missing parameters: %s" % sorted(missing))
    module.load_state_dict(state)
