"""Error type shared by every module; the CLI maps it to exit codes."""


class PengaugeError(Exception):
    """Domain error with a stable machine-readable slug.

    The slug is what scripts and tests key on; the message is for humans.
    """

    def __init__(self, slug: str, message: str):
        self.slug = slug
        super().__init__(f"{slug}: {message}")
