"""Smoke test for the Python bindings.

Build first:  cargo build --release -p dsltrans-py --features extension-module
Then run:     python3 python/smoke_test.py
"""

import importlib.util
import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libdsltrans.so"
        if lib.exists():
            break
    else:
        sys.exit("libdsltrans.so not found; build the dsltrans-py crate first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    dest = tmp / "dsltrans.so"
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("dsltrans", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    dt = load_module()

    assert dt.compute_cutoff(5, 3, 1, 1, 5, 8) == (120, 150, 102, 102)

    spec = dt.Specification.load(str(FIXTURES / "uml2java.dslt"))
    assert "PackageHasPackageDeclaration" in spec.properties
    assert spec.transformations == ["uml2java"]

    cut = json.loads(spec.cutoff("PackageHasPackageDeclaration"))
    assert cut["bounds"]["k"] == 2

    verdicts = json.loads(spec.verify(timeout=60.0))
    status = {v["property"]: v["status"] for v in verdicts}
    assert status["PackageHasPackageDeclaration"] == "HOLDS"
    assert status["ClassMappedToInterfaceDeclaration_ShouldFail"] == "VIOLATED"

    target = json.loads(spec.run("{}"))
    assert target["elements"] == []

    proof, doc = spec.abstraction()
    assert json.loads(doc)["report"]["valid"]
    assert dt.Specification.parse(proof).properties == spec.properties

    try:
        dt.Specification.parse("metamodel")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed spec accepted")

    print("python smoke test passed:", ", ".join(f"{k}={v}" for k, v in sorted(status.items())))


if __name__ == "__main__":
    main()
