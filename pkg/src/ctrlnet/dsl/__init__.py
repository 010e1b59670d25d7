"""Concrete syntax for robot descriptions and control collections."""

from .lexer import KEYWORDS, Token, tokenize
from .nodes import (
    CARTESIAN,
    DIRECT,
    JOINT_SPACE,
    POSITION,
    VELOCITY,
    WBC,
    CascadeDecl,
    CascadeStage,
    ControlCollectionDecl,
    DeviceDecl,
    DeviceTypeDecl,
    InterfaceDecl,
    RobotDecl,
    SpecDocument,
    WbcBlockDecl,
)
from .parser import parse, parse_text
from .printer import format_document

__all__ = [
    "CARTESIAN",
    "DIRECT",
    "JOINT_SPACE",
    "KEYWORDS",
    "POSITION",
    "VELOCITY",
    "WBC",
    "CascadeDecl",
    "CascadeStage",
    "ControlCollectionDecl",
    "DeviceDecl",
    "DeviceTypeDecl",
    "InterfaceDecl",
    "RobotDecl",
    "SpecDocument",
    "Token",
    "WbcBlockDecl",
    "format_document",
    "parse",
    "parse_text",
    "tokenize",
]
