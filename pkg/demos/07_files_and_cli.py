"""Chain files on disk and the qsdkit command line."""

import json
import tempfile
from pathlib import Path

from qsdkit.cli import main
from qsdkit.fileio import format_chain, read_chain, write_chain
from qsdkit.fixtures import chain_A

tmp = Path(tempfile.mkdtemp())
write_chain(chain_A(), tmp / "A.chain")
print((tmp / "A.chain").read_text())
print(read_chain(tmp / "A.chain").dense())

# Same as running `qsdkit qsd A.chain` in a shell
import contextlib
import io

buf = io.StringIO()
with contextlib.redirect_stdout(buf):
    code = main(["qsd", str(tmp / "A.chain")])
report = json.loads(buf.getvalue())
print("exit", code, "theta_bar", report["certificate"]["theta_bar"],
      "j", report["certificate"]["j"], "eta", report["certificate"]["eta"])
print(format_chain(chain_A()) == (tmp / "A.chain").read_text())
