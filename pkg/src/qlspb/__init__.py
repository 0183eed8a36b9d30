"""Matrix-level simulator and benchmark harness for the kernel-reflection
("Shortcut") quantum linear-system solver."""

from qlspb.errors import QlspbError

__version__ = "0.1.0"

__all__ = ["QlspbError", "__version__"]
