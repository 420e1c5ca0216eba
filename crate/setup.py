"""Builds the Rust extension with cargo; no maturin dependency."""

import pathlib
import shutil
import subprocess

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ROOT = pathlib.Path(__file__).parent.resolve()


class CargoExtension(Extension):
    def __init__(self, name, crate):
        super().__init__(name, sources=[])
        self.crate = crate


class cargo_build_ext(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            [
                "cargo",
                "build",
                "--release",
                "-p",
                ext.crate,
                "--features",
                "extension-module",
            ],
            cwd=ROOT,
            check=True,
        )
        built = ROOT / "target" / "release" / "lib_native.so"
        out = pathlib.Path(self.get_ext_fullpath(ext.name))
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, out)


setup(
    ext_modules=[CargoExtension("evosyn_py._native", "evosyn-py")],
    cmdclass={"build_ext": cargo_build_ext},
)
