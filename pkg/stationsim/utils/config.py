"""stationsim configuration file functionality"""
import configparser
import dataclasses
import os
import tempfile
from typing import Optional, Tuple

from ..classifiers import Voting
from ..evaluation import (DEFAULT_DISTANCE_GRID, DEFAULT_STRING_GRID,
                          ExperimentConfig)
from ..forest import ForestParams
from ..geometry import GridSpec
from ..labels import default_rules, load_rules
from ..osm import SpicingConfig, parse_station_tags
from ..station import ConfigError
from .misc import parse_list

__all__ = ['load_config', 'print_config', 'pipeline_config', 'PipelineConfig']

# dir where the default config file is stored
CONFIGDIR = 'data'
CONFIG_FILENAME = 'stationsimrc'


def load_config(extra_files=()):
    """
    Read the stationsimrc configuration files: the defaults shipped with the
    package, then the user's file if one exists, then `extra_files`. Later
    files override earlier ones.
    """
    config = configparser.ConfigParser()

    config_files = _find_config_files()
    for path in extra_files:
        if not os.path.isfile(path):
            raise ConfigError(f'Config file {path} does not exist')
        config_files.append(path)

    try:
        read = config.read(config_files, encoding='utf-8')
    except configparser.Error as e:
        raise ConfigError(f'Invalid config file: {e}') from None
    missing = set(config_files) - set(read)
    if missing:
        raise ConfigError(f'Could not read config file(s) {sorted(missing)}')

    # Use absolute filepaths and adjust OS-dependent paths as needed
    filepaths = [
        ('paths', 'report_dir'),
        ('evaluation', 'rules_file'),
    ]
    _fix_filepaths(config, filepaths)

    return config


def print_config(config, extra_files=()):
    """Print the configuration files read and the resulting options"""
    print("FILES USED:")
    for file_ in _find_config_files() + list(extra_files):
        print("  " + file_)

    print("\nCONFIGURATION:")
    for section in config.sections():
        print("  [{0}]".format(section))
        for option in config.options(section):
            print("  {} = {}".format(option, config.get(section, option)))
        print("")


def _get_home():
    """Find user's home directory if possible.
    Otherwise raise error.
    """
    path = os.path.expanduser("~")

    if not os.path.isdir(path):
        for evar in ('HOME', 'USERPROFILE', 'TMP'):
            try:
                path = os.environ[evar]
                if os.path.isdir(path):
                    break
            except KeyError:
                pass
    if path:
        return path
    else:
        raise ConfigError('please define environment variable $HOME')


def _find_config_files():
    """Finds locations of stationsim configuration files"""
    config_files = []

    # find default configuration file
    module_dir = os.path.dirname(os.path.dirname(__file__))
    config_files.append(os.path.join(module_dir, CONFIGDIR, CONFIG_FILENAME))

    # if a user configuration file exists, add that to list of files to read
    # so that any values set there will override ones specified in the default
    # config file
    config_path = _get_user_configdir()

    if os.path.exists(os.path.join(config_path, CONFIG_FILENAME)):
        config_files.append(os.path.join(config_path, CONFIG_FILENAME))

    return config_files


def _get_user_configdir():
    """
    Return the string representing the configuration dir.
    The default is "HOME/.stationsim".  You can override this with the
    STATIONSIM_CONFIGDIR environment variable
    """
    configdir = os.environ.get('STATIONSIM_CONFIGDIR')

    if configdir is not None:
        if not os.path.isdir(configdir):
            raise ConfigError('STATIONSIM_CONFIGDIR="{0}" is not a directory'
                              .format(configdir))

        return configdir

    return os.path.join(_get_home(), '.stationsim')


def _fix_filepaths(config, filepaths):
    """Converts relative filepaths to absolute filepaths"""
    # Parse working_dir
    working_dir = _expand_filepath(config.get("general", "working_dir"))
    config.set('general', 'working_dir', working_dir)

    for f in filepaths:
        val = config.get(*f, fallback='')
        # empty means "not set"
        if not val:
            continue

        filepath = _expand_filepath(val, working_dir)

        # Replace config value with full filepath
        params = f + (filepath,)
        config.set(*params)


def _expand_filepath(filepath, working_dir=""):
    """Checks a filepath and expands it if necessary"""
    # Expand home directory
    if filepath[0] == "~":
        return os.path.abspath(os.path.expanduser(filepath))
    # Check for /tmp
    elif filepath == "/tmp":
        return tempfile.gettempdir()
    # Relative filepaths
    elif not os.path.isabs(filepath):
        return os.path.abspath(os.path.join(working_dir, filepath))
    # Absolute filepath
    else:
        return os.path.abspath(filepath)


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    """Validated settings of all commands"""
    seed: int
    n_jobs: int
    station_tags: Tuple[str, ...]
    label_attributes: Tuple[str, ...]
    radius: float
    same_name_radius: float
    spicing: SpicingConfig
    grid: GridSpec
    top_k: int
    forest: ForestParams
    experiment: ExperimentConfig
    rules_file: Optional[str]
    report_dir: str


def _max_features(value):
    value = value.strip()
    if value in ('sqrt', 'log2', 'all'):
        return value
    if '.' in value:
        return float(value)
    return int(value)


def _thresholds(value):
    """``P+ED=100:0.8, ED=0.85`` -> {'P+ED': (100.0, 0.8), 'ED': (0.85,)}"""
    out = {}
    for item in parse_list(value):
        name, sep, values = item.partition('=')
        if not sep:
            raise ValueError(f'Thresholds must look like NAME=T[:T]. '
                             f'Is {item!r}')
        out[name.strip().upper()] = tuple(float(v) for v in values.split(':'))
    return out


def _threads(config, use_env=True):
    env = os.environ.get('STATIONSIM_THREADS') if use_env else None
    threads = int(env) if env else config.getint('general', 'threads')
    if threads < 0:
        raise ValueError(f'threads must be >= 0. Is {threads}')
    # joblib uses all cores for -1
    return -1 if threads == 0 else threads


def pipeline_config(config, overrides=None):
    """Turn a parsed configuration into a :class:`PipelineConfig`.

    `overrides` maps ``'section.option'`` to values that take precedence over
    the configuration files (command line flags). None values are ignored.
    Raises ConfigError on any invalid or inconsistent setting.
    """
    config = _copy(config)
    overrides = overrides or {}
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, option = key.partition('.')
        if not config.has_section(section):
            config.add_section(section)
        if isinstance(value, (list, tuple)):
            value = ', '.join(str(v) for v in value)
        config.set(section, option, str(value))
    try:
        return _build(config,
                      use_env=overrides.get('general.threads') is None)
    except ConfigError:
        raise
    except (ValueError, configparser.Error) as e:
        raise ConfigError(str(e)) from None


def _copy(config):
    out = configparser.ConfigParser()
    out.read_dict(config)
    return out


def _build(c, use_env=True):
    seed = c.getint('general', 'seed')
    n_jobs = _threads(c, use_env)
    station_tags = tuple(parse_list(c.get('osm', 'station_tags')))
    parse_station_tags(station_tags)
    label_attributes = tuple(parse_list(c.get('osm', 'label_attributes')))
    if not label_attributes:
        raise ValueError('No label attributes configured')
    spicing = SpicingConfig(p=c.getfloat('spicing', 'p'),
                            n_fakes=c.getint('spicing', 'n_fakes'),
                            fake_radius=c.getfloat('spicing', 'fake_radius'),
                            noise_sigma=c.getfloat('spicing', 'noise_sigma'),
                            seed=seed)
    grid = GridSpec(c.getint('features', 'base_resolution'),
                    c.getint('features', 'n_grids'))
    top_k = c.getint('features', 'top_k')
    max_depth = c.get('forest', 'max_depth').strip()
    forest = ForestParams(
        n_trees=c.getint('forest', 'n_trees'),
        max_features=_max_features(c.get('forest', 'max_features')),
        min_samples_split=c.getint('forest', 'min_samples_split'),
        max_depth=int(max_depth) if max_depth else None,
        bootstrap=c.getboolean('forest', 'bootstrap'),
        seed=seed)

    ev = c['evaluation']
    normalize = ev.getboolean('normalize')
    rules_file = ev.get('rules_file') or None
    rules = None
    if normalize:
        try:
            rules = load_rules(rules_file) if rules_file else default_rules()
        except OSError as e:
            raise ConfigError(f'Cannot read normalization rules: {e}') \
                from None
    string_grid = parse_list(ev.get('string_thresholds'), float) or \
        DEFAULT_STRING_GRID
    distance_grid = parse_list(ev.get('distance_thresholds'), float) or \
        DEFAULT_DISTANCE_GRID
    experiment = ExperimentConfig(
        classifiers=tuple(parse_list(ev.get('classifiers'))),
        thresholds=_thresholds(ev.get('thresholds')),
        train_fraction=ev.getfloat('train_fraction'),
        repetitions=ev.getint('repetitions'),
        seed=seed,
        normalize=normalize,
        rules=rules,
        spicing=spicing,
        string_grid=tuple(string_grid),
        distance_grid=tuple(distance_grid),
        voting=Voting(ev.get('voting').strip().lower()),
        bts_mode=ev.get('bts_fallback').strip(),
        bts_limit=ev.getint('bts_limit'),
        peq_epsilon=ev.getfloat('peq_epsilon'),
        forest=forest,
        top_k=top_k,
        grid=grid,
        n_jobs=n_jobs)

    radius = c.getfloat('osm', 'radius')
    same_name_radius = c.getfloat('osm', 'same_name_radius')
    if not radius > 0 or same_name_radius < 0:
        raise ValueError('radius must be > 0 and same_name_radius >= 0')
    return PipelineConfig(
        seed=seed, n_jobs=n_jobs, station_tags=station_tags,
        label_attributes=label_attributes, radius=radius,
        same_name_radius=same_name_radius, spicing=spicing, grid=grid,
        top_k=top_k, forest=forest, experiment=experiment,
        rules_file=rules_file,
        report_dir=c.get('paths', 'report_dir'))
