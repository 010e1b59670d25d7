"""Recursive-descent parser for control-network documents.

Errors inside a declaration abandon that declaration only: the parser skips
to the end of the enclosing ``{ ... }`` block and continues, so one pass
reports every independent problem.
"""

from __future__ import annotations

from ..diagnostics import CompileError, Diagnostic, SourceSpan, error
from .lexer import Token, tokenize
from .nodes import (
    CARTESIAN,
    CONTROL_MODES,
    DIRECT,
    JOINT_SPACE,
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

TOP_LEVEL = ("device_type", "robot", "control_collection")
COLLECTION_MEMBERS = ("control_interface", "cartesian_control_interface", "wbc_interface", "cascade")
INTERFACE_STARTS = ("control_interface", "cartesian_control_interface")

# Cartesian task weights may be given per axis (6) or as x, y, z plus one
# shared orientation weight (4).
CARTESIAN_WEIGHT_LENGTHS = (6, 4)


class _Bail(Exception):
    """Abort the current declaration; the caller recovers."""


class Parser:
    def __init__(self, tokens: list[Token], file: str | None = None):
        self.tokens = list(tokens)
        if file is None:
            file = self.tokens[0].span.file if self.tokens else "<input>"
        self.file = file
        if self.tokens and self.tokens[-1].kind == "EOF":
            eof = self.tokens.pop()
        else:
            last = self.tokens[-1].span if self.tokens else SourceSpan(file, 1, 1, 1, 1, 0, 0)
            eof = Token(
                "EOF",
                "",
                SourceSpan(file, last.end_line, last.end_column, last.end_line, last.end_column,
                           last.end_offset, last.end_offset),
            )
        self.tokens.append(eof)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def _at(self, kind: str, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def _at_keyword(self, *names: str) -> bool:
        return self.tok.kind == "KEYWORD" and self.tok.value in names

    def _error(self, code: str, message: str, span: SourceSpan | None) -> None:
        self.diagnostics.append(error(code, message, span))

    def _fail(self, expected: str) -> _Bail:
        t = self.tok
        if t.kind == "EOF":
            self._error("unexpected-eof", f"expected {expected}, found end of input", t.span)
        else:
            self._error("unexpected-token", f"expected {expected}, found {t.describe()}", t.span)
        return _Bail()

    def _expect(self, kind: str, value=None, what: str | None = None) -> Token:
        if self._at(kind, value):
            return self._advance()
        raise self._fail(what or (f"'{value}'" if value is not None else kind.lower()))

    def _keyword(self, name: str) -> Token:
        return self._expect("KEYWORD", name, f"'{name}'")

    def _ident(self, what: str = "identifier") -> Token:
        return self._expect("IDENT", what=what)

    def _open(self) -> Token:
        return self._expect("LBRACE", what="'{'")

    def _close(self, opener: Token) -> Token:
        if self._at("RBRACE"):
            return self._advance()
        if self._at("EOF"):
            self._error("unclosed-block", f"block opened at {opener.span} is never closed", opener.span)
            raise _Bail()
        raise self._fail("'}'")

    # -- recovery ------------------------------------------------------------

    def _recover(self, start: int, starters: tuple[str, ...]) -> None:
        """Skip the declaration beginning at ``start``.

        Resumes after the declaration's balanced ``{ ... }`` block, before the
        next starter keyword, or before a ``}`` closing the enclosing block.
        """
        depth = sum(
            (t.kind == "LBRACE") - (t.kind == "RBRACE") for t in self.tokens[start:self.pos]
        )
        if depth > 0:
            self._skip_to_depth_zero(depth)
            return
        i = max(self.pos, start)
        while True:
            t = self.tokens[i]
            if t.kind == "EOF" or (t.kind == "RBRACE" and i > start):
                break
            if t.kind == "KEYWORD" and t.value in starters and i > start:
                break
            if t.kind == "LBRACE":
                self.pos = i + 1
                self._skip_to_depth_zero(1)
                return
            i += 1
        self.pos = i

    def _skip_to_depth_zero(self, depth: int) -> None:
        while depth > 0:
            t = self.tokens[self.pos]
            if t.kind == "EOF":
                if not any(d.code in ("unclosed-block", "unexpected-eof") for d in self.diagnostics):
                    self._error("unclosed-block", "block is never closed before end of input", t.span)
                return
            if t.kind == "LBRACE":
                depth += 1
            elif t.kind == "RBRACE":
                depth -= 1
            self.pos += 1

    # -- literals ------------------------------------------------------------

    def _ident_list(self) -> tuple[list[str], SourceSpan]:
        start = self._expect("LBRACKET", what="'['")
        names = [self._ident("identifier").value]
        while self._at("COMMA"):
            self._advance()
            names.append(self._ident("identifier").value)
        end = self._expect("RBRACKET", what="',' or ']'")
        return names, start.span.to(end.span)

    def _num_list(self) -> tuple[list[float], SourceSpan]:
        start = self._expect("LBRACKET", what="'['")
        values = [self._expect("NUMBER", what="number").value]
        while self._at("COMMA"):
            self._advance()
            values.append(self._expect("NUMBER", what="number").value)
        end = self._expect("RBRACKET", what="',' or ']'")
        return values, start.span.to(end.span)

    def _mode(self) -> str:
        t = self.tok
        if t.kind == "IDENT" and t.value in CONTROL_MODES:
            self._advance()
            return t.value
        raise self._fail("'position' or 'velocity'")

    def _field_name(self, allowed: tuple[str, ...], seen: dict[str, Token]) -> Token:
        if not self._at_keyword(*allowed):
            raise self._fail(" or ".join(f"'{a}'" for a in allowed) + " or '}'")
        t = self._advance()
        if t.value in seen:
            self._error("duplicate-field", f"'{t.value}' given twice (first at {seen[t.value].span})", t.span)
        seen[t.value] = t
        self._expect("COLON", what="':'")
        return t

    # -- grammar -------------------------------------------------------------

    def parse_document(self) -> SpecDocument:
        device_types: list[DeviceTypeDecl] = []
        robots: list[RobotDecl] = []
        collections: list[ControlCollectionDecl] = []
        while not self._at("EOF"):
            start = self.pos
            try:
                if self._at_keyword("device_type"):
                    device_types.append(self._device_type())
                elif self._at_keyword("robot"):
                    robot = self._robot()
                    if robots:
                        self._error(
                            "duplicate-robot",
                            f"second robot declaration (first at {robots[0].span})",
                            robot.span,
                        )
                    robots.append(robot)
                elif self._at_keyword("control_collection"):
                    coll = self._collection()
                    if not robots:
                        self._error("order", "control_collection must follow the robot declaration", coll.span)
                    collections.append(coll)
                else:
                    raise self._fail("'device_type', 'robot' or 'control_collection'")
            except _Bail:
                self._recover(start, TOP_LEVEL)
                if self._at("RBRACE"):
                    self._error("unexpected-token", "unmatched '}'", self.tok.span)
                    self._advance()
        if not robots:
            self._error("missing-robot", "document has no robot declaration", self.tok.span)
        self._check_names(collections)
        if any(d.is_error for d in self.diagnostics):
            raise CompileError(self.diagnostics)
        return SpecDocument(tuple(device_types), robots[0], tuple(collections), self.file)

    def _device_type(self) -> DeviceTypeDecl:
        kw = self._keyword("device_type")
        name = self._ident("device type name").value
        opener = self._open()
        mode = None
        seen: dict[str, Token] = {}
        while not self._at("RBRACE") and not self._at("EOF"):
            self._field_name(("control_mode",), seen)
            mode = self._mode()
        end = self._close(opener)
        span = kw.span.to(end.span)
        if mode is None:
            self._error("missing-field", f"device type '{name}' needs a control_mode", span)
            mode = "position"
        return DeviceTypeDecl(name, mode, span)

    def _robot(self) -> RobotDecl:
        kw = self._keyword("robot")
        opener = self._open()
        path = None
        devices: list[DeviceDecl] = []
        seen: dict[str, Token] = {}
        while not self._at("RBRACE") and not self._at("EOF"):
            start = self.pos
            try:
                if self._at_keyword("device"):
                    devices.append(self._device())
                else:
                    self._field_name(("kinematics",), seen)
                    path = self._expect("STRING", what="kinematics file path").value
            except _Bail:
                self._recover(start, ("device", "kinematics"))
        end = self._close(opener)
        span = kw.span.to(end.span)
        if path is None:
            self._error("missing-field", "robot needs a kinematics description path", span)
        if not devices:
            self._error("empty-robot", "robot declares no devices", span)
        seen_dev: dict[str, DeviceDecl] = {}
        for d in devices:
            if d.name in seen_dev:
                self._error("duplicate-name", f"device '{d.name}' declared twice (first at {seen_dev[d.name].span})",
                            d.span)
            seen_dev.setdefault(d.name, d)
        return RobotDecl(path or "", tuple(devices), span)

    def _device(self) -> DeviceDecl:
        kw = self._keyword("device")
        name = self._ident("device name").value
        self._expect("COLON", what="':'")
        dtype = self._ident("device type").value
        opener = self._open()
        joints: list[str] | None = None
        config = None
        seen: dict[str, Token] = {}
        while not self._at("RBRACE") and not self._at("EOF"):
            f = self._field_name(("joints", "config"), seen)
            if f.value == "joints":
                joints, jspan = self._ident_list()
                self._check_unique(joints, f"device '{name}'", jspan)
            else:
                config = self._expect("STRING", what="config label").value
        end = self._close(opener)
        span = kw.span.to(end.span)
        if joints is None:
            self._error("missing-field", f"device '{name}' needs a joints list", span)
            joints = []
        return DeviceDecl(name, dtype, tuple(joints), config, span)

    def _collection(self) -> ControlCollectionDecl:
        kw = self._keyword("control_collection")
        name = self._ident("collection name").value
        opener = self._open()
        interfaces: list[InterfaceDecl] = []
        blocks: list[WbcBlockDecl] = []
        cascades: list[CascadeDecl] = []
        while not self._at("RBRACE") and not self._at("EOF"):
            start = self.pos
            try:
                if self._at_keyword(*INTERFACE_STARTS):
                    interfaces.append(self._interface(DIRECT))
                elif self._at_keyword("wbc_interface"):
                    blocks.append(self._wbc_block())
                elif self._at_keyword("cascade"):
                    cascades.append(self._cascade())
                else:
                    raise self._fail(", ".join(f"'{k}'" for k in COLLECTION_MEMBERS) + " or '}'")
            except _Bail:
                self._recover(start, COLLECTION_MEMBERS)
        end = self._close(opener)
        return ControlCollectionDecl(name, tuple(interfaces), tuple(blocks), tuple(cascades), kw.span.to(end.span))

    def _interface(self, arbitration: str) -> InterfaceDecl:
        kw = self._advance()
        space = CARTESIAN if kw.value == "cartesian_control_interface" else JOINT_SPACE
        name = self._ident("interface name").value
        opener = self._open()
        allowed = ("joints", "control_mode", "priority", "weights")
        if space == CARTESIAN:
            allowed = ("frames",) + allowed
        joints = None
        frames = None
        mode = None
        priority = None
        weights = None
        fields: dict[str, Token] = {}
        spans: dict[str, SourceSpan] = {}
        while not self._at("RBRACE") and not self._at("EOF"):
            f = self._field_name(allowed, fields)
            if f.value == "joints":
                joints, spans["joints"] = self._ident_list()
                self._check_unique(joints, f"interface '{name}'", spans["joints"])
            elif f.value == "frames":
                root = self._ident("root frame").value
                self._expect("ARROW", what="'->'")
                tip = self._ident("tip frame").value
                frames = (root, tip)
            elif f.value == "control_mode":
                mode = self._mode()
            elif f.value == "priority":
                t = self._expect("NUMBER", what="priority number")
                if t.value != int(t.value) or t.value < 1:
                    self._error("bad-priority", f"priority must be a positive integer, got {t.value:g}", t.span)
                priority = max(1, int(t.value))
            elif f.value == "weights":
                weights, spans["weights"] = self._num_list()
        end = self._close(opener)
        span = kw.span.to(end.span)
        if joints is None:
            self._error("missing-field", f"interface '{name}' needs a joints list", span)
            joints = []
        if space == CARTESIAN and frames is None:
            self._error("missing-field", f"cartesian interface '{name}' needs frames: ROOT -> TIP", span)
        if arbitration == WBC and priority is None:
            self._error("missing-field", f"wbc member '{name}' needs a priority", span)
        if arbitration == DIRECT and priority is not None:
            self._error("misplaced-field", f"priority on '{name}' is only meaningful inside a wbc_interface",
                        fields["priority"].span)
        if weights is not None:
            if arbitration == DIRECT:
                self._error("misplaced-field", f"weights on '{name}' are only meaningful inside a wbc_interface",
                            fields["weights"].span)
            elif space == CARTESIAN and len(weights) not in CARTESIAN_WEIGHT_LENGTHS:
                self._error("weights-length",
                            f"cartesian task '{name}' takes 6 weights (or x, y, z and one orientation weight), "
                            f"got {len(weights)}", spans["weights"])
            elif space == JOINT_SPACE and len(weights) != len(joints):
                self._error("weights-length",
                            f"task '{name}' has {len(joints)} joints but {len(weights)} weights", spans["weights"])
            if any(w < 0 for w in weights):
                self._error("negative-weight", f"weights of '{name}' must be non-negative", spans["weights"])
        return InterfaceDecl(
            name,
            space,
            tuple(joints),
            frames,
            mode,
            arbitration,
            priority,
            tuple(weights) if weights is not None else None,
            span,
        )

    def _wbc_block(self) -> WbcBlockDecl:
        kw = self._keyword("wbc_interface")
        name = self._ident("wbc block name").value
        opener = self._open()
        joints = None
        weights = None
        members: list[InterfaceDecl] = []
        seen: dict[str, Token] = {}
        spans: dict[str, SourceSpan] = {}
        while not self._at("RBRACE") and not self._at("EOF"):
            start = self.pos
            try:
                if self._at_keyword(*INTERFACE_STARTS):
                    members.append(self._interface(WBC))
                    continue
                f = self._field_name(("joints", "initial_joint_weights", "control_interface",
                                      "cartesian_control_interface"), seen)
                if f.value == "joints":
                    joints, spans["joints"] = self._ident_list()
                    self._check_unique(joints, f"wbc block '{name}'", spans["joints"])
                else:
                    weights, spans["weights"] = self._num_list()
            except _Bail:
                self._recover(start, INTERFACE_STARTS + ("joints", "initial_joint_weights"))
        end = self._close(opener)
        span = kw.span.to(end.span)
        if joints is None:
            self._error("missing-field", f"wbc block '{name}' needs a joints list", span)
            joints = []
        if weights is None:
            weights = [1.0] * len(joints)
        elif len(weights) != len(joints):
            self._error("weights-length",
                        f"wbc block '{name}' has {len(joints)} joints but {len(weights)} initial joint weights",
                        spans["weights"])
        elif any(w < 0 for w in weights):
            self._error("negative-weight", f"initial joint weights of '{name}' must be non-negative",
                        spans["weights"])
        block_joints = set(joints)
        for m in members:
            outside = [j for j in m.joint_names if j not in block_joints]
            if outside:
                self._error("member-joints",
                            f"wbc member '{m.name}' uses joint '{outside[0]}' outside block '{name}'", m.span)
        return WbcBlockDecl(name, tuple(joints), tuple(weights), tuple(members), span)

    def _cascade(self) -> CascadeDecl:
        kw = self._keyword("cascade")
        target = self._ident("interface name").value
        opener = self._open()
        stages: list[CascadeStage] = []
        while not self._at("RBRACE") and not self._at("EOF"):
            push = self._keyword("push")
            kind = self._ident("component kind")
            config = None
            end_span = kind.span
            if self._at_keyword("config"):
                self._advance()
                self._expect("COLON", what="':'")
                c = self._expect("STRING", what="config label")
                config, end_span = c.value, c.span
            stages.append(CascadeStage(kind.value, config, push.span.to(end_span)))
        end = self._close(opener)
        span = kw.span.to(end.span)
        if not stages:
            self._error("empty-cascade", f"cascade on '{target}' pushes no stages", span)
        return CascadeDecl(target, tuple(stages), span)

    # -- invariants ----------------------------------------------------------

    def _check_unique(self, names, owner: str, span: SourceSpan) -> None:
        seen = set()
        for n in names:
            if n in seen:
                self._error("duplicate-joint", f"{owner} lists joint '{n}' twice", span)
            seen.add(n)

    def _check_names(self, collections: list[ControlCollectionDecl]) -> None:
        seen_coll: dict[str, ControlCollectionDecl] = {}
        for c in collections:
            if c.name in seen_coll:
                self._error("duplicate-name", f"collection '{c.name}' declared twice", c.span)
            seen_coll.setdefault(c.name, c)
            names: dict[str, SourceSpan | None] = {}
            for item in list(c.all_interfaces()) + list(c.wbc_blocks):
                if item.name in names:
                    self._error("duplicate-name",
                                f"name '{item.name}' used twice in collection '{c.name}' (first at {names[item.name]})",
                                item.span)
                names.setdefault(item.name, item.span)


def parse(tokens: list[Token], file: str | None = None) -> SpecDocument:
    """Build a :class:`SpecDocument`; raises :class:`CompileError` on any error."""
    return Parser(tokens, file).parse_document()


def parse_text(text: str, file: str = "<input>") -> SpecDocument:
    return parse(tokenize(text, file), file)
