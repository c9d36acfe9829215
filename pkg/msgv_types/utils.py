from pathlib import Path
import re
from typing import Optional, Union

CHECKPOINT_PATTERN = re.compile(r"^ckpt_(\d{8})\.msgv$")


def latest_checkpoint(run_dir: Union[str, Path], final_name: str = "ckpt_final.msgv") -> Optional[Path]:
    """
    Newest checkpoint of a run directory: the final one if present,
    otherwise the periodic checkpoint with the highest step.
    Returns None when the directory holds no checkpoint.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        return None

    final = run_dir / final_name
    if final.is_file():
        return final

    best_step, best = -1, None
    for path in run_dir.iterdir():
        match = CHECKPOINT_PATTERN.match(path.name)
        if match and path.is_file() and int(match.group(1)) > best_step:
            best_step, best = int(match.group(1)), path
    return best
