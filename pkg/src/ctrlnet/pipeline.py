"""Source text to component network: parse, load kinematics, resolve, instantiate."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .compiler.instantiate import instantiate
from .compiler.network import ComponentNetwork, validate_network
from .compiler.resolve import ResolvedModel, resolve
from .diagnostics import CompileError, Diagnostic, error
from .dsl.nodes import SpecDocument
from .dsl.parser import parse_text
from .kinematics import KinematicsError, KinematicTree, load_kinematic_description


@dataclass
class CompileResult:
    doc: SpecDocument
    tree: KinematicTree
    model: ResolvedModel
    network: ComponentNetwork
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def base_dir(self) -> Path:
        return Path(self.doc.file).parent


def kinematics_path(doc: SpecDocument) -> Path:
    """The robot's kinematic description, relative to the document's directory."""
    p = Path(doc.robot.kinematics_path)
    if p.is_absolute():
        return p
    return Path(doc.file).parent / p


def load_tree(doc: SpecDocument) -> KinematicTree:
    path = kinematics_path(doc)
    try:
        return load_kinematic_description(path)
    except OSError as exc:
        raise CompileError([error("kinematics", f"cannot read kinematic description '{path}': {exc.strerror}", doc.robot.span)])
    except KinematicsError as exc:
        raise CompileError([error("kinematics", f"{path}: {exc}", doc.robot.span)])


def compile_text(
    text: str,
    file: str = "<input>",
    tree_loader: Callable[[SpecDocument], KinematicTree] = load_tree,
) -> CompileResult:
    """Compile one document; raises :class:`CompileError` carrying every diagnostic."""
    doc = parse_text(text, file)
    tree = tree_loader(doc)
    model = resolve(doc, tree)
    network = instantiate(model)
    validate_network(network)
    return CompileResult(doc, tree, model, network, list(model.diagnostics))


def compile_file(path: str | os.PathLike) -> CompileResult:
    path = Path(path)
    return compile_text(path.read_text(encoding="utf-8"), str(path))
