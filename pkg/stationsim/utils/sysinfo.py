import datetime
import importlib
import platform

__all__ = ['get_sys_dict', 'system_info']

LIBRARIES = ('numpy', 'matplotlib', 'lxml', 'joblib', 'sklearn', 'tqdm')


def _version(module):
    try:
        mod = importlib.import_module(module)
    except ImportError:
        return "NOT INSTALLED"
    if module == 'lxml':
        # lxml keeps its version on the etree module
        from lxml import etree
        return '.'.join(str(v) for v in etree.LXML_VERSION)
    return getattr(mod, '__version__', 'unknown')


def get_sys_dict():
    """Platform and library versions of this installation.

    Returns
    -------
    sys_prop : dict
        Keys 'Time', 'System', 'Processor', 'Arch', 'Python', 'stationsim' and
        one key per runtime dependency, mapped to version strings.
    """
    from stationsim import __version__

    sys_prop = {
        'Time': datetime.datetime.utcnow().strftime("%Y-%m-%d %H:%M UT"),
        'System': platform.system(),
        'Processor': platform.processor(),
        'Arch': platform.architecture()[0],
        'Python': platform.python_version(),
        'stationsim': __version__}
    sys_prop.update((lib, _version(lib)) for lib in LIBRARIES)
    return sys_prop


def system_info():
    """Print :func:`get_sys_dict` for bug reports"""
    sys_prop = get_sys_dict()
    width = max(len(k) for k in sys_prop)
    print("stationsim installation")
    print("-----------------------")
    for key in ('Time', 'System', 'Processor', 'Arch', 'stationsim'):
        print(f"{key:<{width}} : {sys_prop[key]}")
    print()
    print("libraries")
    print("---------")
    for key in ('Python',) + LIBRARIES:
        print(f"{key:<{width}} : {sys_prop[key]}")
