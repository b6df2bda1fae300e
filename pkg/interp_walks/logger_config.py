"""
Interpolated Walks - Logging Configuration
Plain ASCII logging to stdout with an optional log file
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(log_level=logging.INFO, log_file: Optional[Union[str, Path]] = None):
    """Configure root logging for command-line runs"""

    formatter = logging.Formatter(LOG_FORMAT)

    # Console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    handlers = [console_handler]

    # File handler with UTF-8 encoding
    if log_file is not None:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding='utf-8')
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    logging.basicConfig(
        level=log_level,
        handlers=handlers,
        format=LOG_FORMAT,
        force=True,
    )

    return logging.getLogger('interp_walks')


# Message templates without Unicode
SUCCESS_MESSAGES = {
    'chain_validated': 'Chain validated: n={}, ergodic={}, reversible={}',
    'schedule_built': 'Schedule built: kind={}, r={}, anchor={}',
    'run_complete': '{} complete: p_succ={:.6f}, bound={:.6f}, calls={}',
    'qsample_complete': 'Qsampling complete: fidelity={:.6f}, accepted={:.6f}',
    'curve_complete': 'Success curve complete: {} rows, truncated_at={}',
    'adiabatic_built': 'Adiabatic sequence built: r={}, {} chains',
    'result_written': 'Result written: {}',
}

WARNING_MESSAGES = {
    'gamma_shrunk': 'Truncation radius {} exceeds t+1={}, shrinking',
    'schedule_fallback': 'Paper schedule infeasible for r={} (max {}), using stationary schedule',
    'live_tracking': 'Flag tracking limited to the live branch ({} amplitudes over budget)',
    'curve_truncated': 'Success curve truncated at r={}: {}',
}

ERROR_MESSAGES = {
    'run_failed': 'Run failed: {}',
    'config_error': 'Configuration error: {}',
}
