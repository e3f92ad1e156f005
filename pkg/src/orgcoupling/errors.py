"""Exception hierarchy.

Every failure the library raises derives from :class:`OrgCouplingError`.
Subclasses of :class:`DataError` signal bad input data (the CLI maps them to
exit status 2); the rest are programming or environment errors.
"""


class OrgCouplingError(Exception):
    pass


class DataError(OrgCouplingError):
    pass


# history ingest
class RepoNotFound(DataError):
    pass


class GitInvocationFailed(DataError):
    pass


class MalformedNumstat(DataError):
    pass


class MalformedCommitLog(DataError):
    pass


class EmptyIdentity(DataError):
    pass


class UnmappedFile(DataError):
    pass


class DuplicateShaConflict(DataError):
    pass


class InvalidServiceMap(DataError):
    pass


# github client
class GitHubError(DataError):
    pass


class AuthFailed(GitHubError):
    pass


class RateLimited(GitHubError):
    pass


class NotFound(GitHubError):
    pass


class TransientHttp(GitHubError):
    pass


# ownership
class UnknownService(DataError):
    pass


class ZeroContribution(DataError):
    pass


# coupling
class EmptyTouchSet(OrgCouplingError, ValueError):
    pass


class InconsistentCounts(OrgCouplingError, ValueError):
    pass


class NegativeValue(OrgCouplingError, ValueError):
    pass


# evolution / report
class TooFewWindows(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class EmptyWindowSeries(UserWarning):
    """No commit fell inside any window of an evolution series."""
