import os
import sys

import pytest


def _import_module():
    """Prefer an installed ccopf package; fall back to the build tree."""
    try:
        import ccopf  # noqa: F401

        return ccopf
    except ImportError:
        pass
    module_dir = os.environ.get("CCOPF_MODULE_DIR")
    if module_dir:
        sys.path.insert(0, module_dir)
    pkg_dir = os.environ.get("CCOPF_PKG_DIR")
    if pkg_dir and module_dir:
        # expose python/ccopf with the built extension alongside it
        import importlib.util

        spec = importlib.util.spec_from_file_location(
            "_ccopf", _find_extension(module_dir)
        )
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        sys.modules["_ccopf"] = module
    import _ccopf

    return _ccopf


def _find_extension(module_dir):
    for name in os.listdir(module_dir):
        if name.startswith("_ccopf") and name.endswith(".so"):
            return os.path.join(module_dir, name)
    raise FileNotFoundError("no _ccopf extension in " + module_dir)


@pytest.fixture(scope="session")
def cc():
    return _import_module()


@pytest.fixture(scope="session")
def data_dir():
    return os.environ.get("CCOPF_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


@pytest.fixture(scope="session")
def cli_path():
    path = os.environ.get("CCOPF_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("CCOPF_CLI not set")
    return path
