"""Exception types shared across the package."""


class Sigma2LabError(Exception):
    """Base class for all package errors."""


class ValidationError(Sigma2LabError):
    """A candidate structure violates a FiniteUslTop axiom."""


class NotPartialOrder(ValidationError):
    def __init__(self, axiom, pair):
        self.axiom = axiom
        self.pair = pair
        super().__init__(f"not a partial order: {axiom} fails at {pair}")


class NoJoin(ValidationError):
    def __init__(self, x, y, minimal_upper_bounds):
        self.x = x
        self.y = y
        self.minimal_upper_bounds = tuple(minimal_upper_bounds)
        super().__init__(
            f"no join for ({x}, {y}); minimal upper bounds: {list(self.minimal_upper_bounds)}"
        )


class BotNotLeast(ValidationError):
    def __init__(self, bot, witness):
        self.pair = (bot, witness)
        super().__init__(f"bot {bot} is not below {witness}")


class TopNotGreatest(ValidationError):
    def __init__(self, top, witness):
        self.pair = (witness, top)
        super().__init__(f"{witness} is not below top {top}")


class InvalidWitness(Sigma2LabError):
    """A claimed substructure inclusion is not an embedding."""


class FormatError(Sigma2LabError):
    """Malformed text document; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class CapExceeded(Sigma2LabError):
    """A resource cap was hit before the computation finished.

    ``partial`` holds whatever was established before stopping.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class ParseError(Sigma2LabError):
    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnboundVariable(ParseError):
    def __init__(self, name, line, column):
        self.name = name
        super().__init__(f"unbound variable '{name}'", line, column)


class NotSigma2(Sigma2LabError):
    def __init__(self, prefix):
        self.prefix = prefix
        super().__init__(f"prefix {format_prefix(prefix)} is not of the form exists* forall*")


class NotPi2(Sigma2LabError):
    def __init__(self, prefix):
        self.prefix = prefix
        super().__init__(f"prefix {format_prefix(prefix)} is not of the form forall* exists*")


def format_prefix(prefix):
    return " ".join(f"{kind} {','.join(names)}" for kind, names in prefix) or "(empty)"


class TooFewCoatoms(Sigma2LabError):
    """Coding needs two coatoms joining to top."""


class PairDoesNotJoinToTop(Sigma2LabError):
    pass


class NotAlmostEndExtension(Sigma2LabError):
    pass


class DecompositionFailed(Sigma2LabError):
    """An invariant of the constructed decomposition did not verify."""


class BadTransferLength(Sigma2LabError):
    pass


class DepthExceeded(Sigma2LabError):
    pass


class PrefixTooShort(Sigma2LabError):
    pass


class InvalidTree(Sigma2LabError):
    pass
