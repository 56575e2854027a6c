"""CMake bridge: builds the _core extension through the project's CMake tree.

Requires a working cmake on PATH; install with --no-build-isolation so the
ambient pybind11 is found.
"""

import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                str(source_dir),
                "-DSKBUILD=ON",
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython_EXECUTABLE={sys.executable}",
            ],
            cwd=build_dir,
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", "--parallel"],
            cwd=build_dir,
            check=True,
        )

        built = list((build_dir / "python" / "dimml").glob("_core.*"))
        if not built:
            raise RuntimeError("CMake did not produce the _core module")
        dest = Path(self.get_ext_fullpath(ext.name)).resolve()
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(built[0].read_bytes())


setup(
    ext_modules=[CMakeExtension("dimml._core")],
    cmdclass={"build_ext": CMakeBuild},
)
