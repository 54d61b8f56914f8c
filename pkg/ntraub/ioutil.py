import json
import pathlib
import warnings
import numpy as np
from .exceptions import ConfigError


def pathize(path):
    """Takes a string or pathlib.Path object and return the corresponding pathlib.Path object.

    Parameters
    ----------
    path : str or pathlib.Path
        Input path

    Returns
    -------
    pathlib.Path
        Returns a pathlib.Path object
    """

    if isinstance(path, str):
        return pathlib.Path(path)
    elif isinstance(path, pathlib.PurePath):
        return path
    else:
        raise TypeError(f'Invalid path type: {type(path)}')


def safely_write(path, lines, overwrite=False):
    """Safely writes a list of lines to the path. Throws an IOError if a path exists and overwrite is set to False.

    Parameters
    ----------
    path : pathlib.Path
        Path of file to write
    lines : list
        List of lines to write
    overwrite : bool, optional
        Overwrites an existing file if True (the default is False)
    """

    path = pathize(path)
    if path.exists() and not overwrite:
        raise IOError(f'{path} already exists!')
    else:
        if path.exists() and overwrite:
            warnings.warn(f'Overwriting {path}')

        with path.open(mode='w') as f:
            for line in lines:
                f.write(line)

    return


def safely_read(path):
    """Safely read a list of lines from the path.

    Parameters
    ----------
    path : pathlib.Path
        Path of file to read

    Returns
    -------
    list
        Return a list of lines from the path
    """

    path = pathize(path)

    with path.open(mode='r') as f:
        lines = f.readlines()
    return lines


def load_config(config):
    """Load a run config, which holds the model spec, the problem, the starting point and solver options.

    Parameters
    ----------
    config : str, dict, pathlib.Path
        A path to a JSON file, or an already-parsed dict (returned as is)

    Returns
    -------
    dict
        Config options, returned as a dict
    """

    if isinstance(config, dict):
        return config
    elif isinstance(config, (str, pathlib.PurePath)):
        path = pathize(config)
    else:
        raise ConfigError(f'Unsupported config file type: {type(config)}')

    try:
        config = json.loads(''.join(safely_read(path)))
    except json.JSONDecodeError as e:
        raise ConfigError(f'Malformed JSON in {path}: {e}') from e

    if not isinstance(config, dict):
        raise ConfigError(f'Config in {path} must be a JSON object, not {type(config).__name__}')
    return config


def jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f'Object of type {type(obj).__name__} is not JSON serializable')


def dumps(obj, indent=2):
    """JSON-encode a report dict; numpy scalars and arrays are converted, floats keep full double precision. With
    indent=None the record is written on a single line.
    """
    return json.dumps(obj, default=jsonable, indent=indent, sort_keys=True)


def write_text(path, text, overwrite=True):
    safely_write(path, [text if text.endswith('\n') else text + '\n'], overwrite=overwrite)
    return
