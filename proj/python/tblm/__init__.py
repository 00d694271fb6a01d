"""Binary learning machine bindings."""

import json

try:
    from ._tblm import *  # noqa: F401,F403
    from ._tblm import parse_args as _parse_args, replay as _replay, run as _run
except ImportError:  # in-tree build: the extension sits next to the build root
    from _tblm import *  # noqa: F401,F403
    from _tblm import parse_args as _parse_args, replay as _replay, run as _run


def train(*args):
    """Run `tblm train` with the given flags; returns the run summary."""
    spec, out_dir = _parse_args(["train", *[str(a) for a in args]])
    return _run(spec, out_dir)


def spec(*args):
    return json.loads(_parse_args(["train", *[str(a) for a in args]])[0])


def replay(genome_path, use_final=False):
    return json.loads(_replay(str(genome_path), use_final))
