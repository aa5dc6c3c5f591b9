"""Python bindings for the visprompt C++ core.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1].
"""

import json

from . import _visprompt
from ._visprompt import Error, grad_check, mae, operator_names, psnr, ssim

__all__ = [
    "Error",
    "Model",
    "apply",
    "default_config",
    "grad_check",
    "mae",
    "make_prompt",
    "make_test_pairs",
    "operator_names",
    "psnr",
    "run_cli",
    "ssim",
    "train",
]


def default_config():
    """The default two-task configuration as a dict."""
    return json.loads(_visprompt.default_config_json())


def apply(name, image, seed=0, **params):
    """Apply an operator or degradation by name, e.g. apply("canny", img, low=40)."""
    return _visprompt.apply_operator(name, image, json.dumps(params) if params else "", seed)


def train(config, stop_after=None):
    """Train with a config dict. Returns ([(step, lr, loss), ...], checkpoint_path)."""
    return _visprompt.train(json.dumps(config), stop_after)


def make_prompt(config, task, prompt_id):
    return _visprompt.make_prompt(json.dumps(config), task, prompt_id)


def make_test_pairs(config, task, n):
    return _visprompt.make_test_pairs(json.dumps(config), task, n)


def run_cli(*args):
    """Run a command-line invocation in-process. Returns (code, stdout, stderr)."""
    return _visprompt.run_cli([str(a) for a in args])


class Model:
    """A trained checkpoint ready for prompted inference."""

    def __init__(self, checkpoint):
        self._model = _visprompt.Model(str(checkpoint))

    @property
    def config(self):
        return json.loads(self._model.config_json)

    @property
    def step(self):
        return self._model.step

    def infer(self, prompt_question, prompt_answer, query):
        return self._model.infer(prompt_question, prompt_answer, query)
