"""CMake-driven build of the compiled extension, packaged with setuptools."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).parent.resolve()
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)

        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={os.environ.get('DSENSE_BUILD_TYPE', 'Release')}",
            "-DDSENSE_BUILD_TESTS=OFF",
            "-DDSENSE_BUILD_PYTHON=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(["cmake", "-S", str(source_dir), "-B", str(build_dir)] + cmake_args,
                       check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "dsense_py", "-j"], check=True)

        built = list((build_dir / "bindings").glob("_dsense*.so"))
        if not built:
            raise RuntimeError("compiled module not found under " + str(build_dir / "bindings"))
        ext_path.parent.mkdir(parents=True, exist_ok=True)
        self.copy_file(str(built[0]), str(ext_path))


setup(
    ext_modules=[CMakeExtension("dsense._dsense")],
    cmdclass={"build_ext": CMakeBuild},
)
