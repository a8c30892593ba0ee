"""Exception hierarchy shared by every module of the package."""


class KbqaError(Exception):
    """Base class for all domain errors raised by kbqa_env."""


# -- action lines ---------------------------------------------------------

class ActionParseError(KbqaError):
    pass


class UnknownVerb(ActionParseError):
    pass


class ArityMismatch(ActionParseError):
    pass


class MalformedBrackets(ActionParseError):
    pass


# -- expression state -----------------------------------------------------

class ActionApplyError(KbqaError):
    pass


class UnresolvedSlot(ActionApplyError):
    pass


class InvalidMode(ActionApplyError):
    pass


class CountNotLast(ActionApplyError):
    pass


class NumberParse(ActionApplyError):
    pass


class TimeParse(ActionApplyError):
    pass


class InvalidAtom(ActionApplyError):
    pass


class InvalidTree(KbqaError):
    pass


# -- S-expression text ----------------------------------------------------

class SExprError(KbqaError):
    """Parse failure; ``offset`` is the 1-based character column."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnbalancedParens(SExprError):
    pass


class UnknownOperator(SExprError):
    pass


class ArityError(SExprError):
    pass


# -- knowledge base / executor --------------------------------------------

class UnreadableSource(KbqaError):
    pass


class EmptyEntitySet(KbqaError):
    pass


class RemoteError(KbqaError):
    pass


class RemoteTimeout(RemoteError):
    pass


class TransportError(RemoteError):
    pass


class MalformedResponse(RemoteError):
    pass


# -- training math / data pipeline ----------------------------------------

class EmptyGroup(KbqaError):
    pass


class LengthMismatch(KbqaError):
    pass


class EmptyReference(KbqaError):
    pass


class UnclosedReferenceBlock(KbqaError):
    pass


# -- episodes -------------------------------------------------------------

class PolicyFailure(KbqaError):
    pass


class GoldParseError(KbqaError):
    pass
