try:
    import neptune
except ImportError:
    neptune = None

use_neptune = False


def init_log(args):
    global use_neptune
    if not args.neptune:
        return
    if neptune is None:
        print("neptune-client is not installed; remote logging disabled.")
        return
    try:
        with open(args.neptune_path, 'r') as f:
            nep = f.readlines()
            neptune.init(nep[0].strip(), api_token=nep[1].strip())
            neptune.create_experiment(name=args.experiment_name,
                                      params=dict(args.scenario))
            use_neptune = True
    except Exception as e:
        print("Neptune init failed: ", e)


def send_log(key, value):
    if use_neptune:
        try:
            neptune.send_metric(key, value)
        except Exception:
            print("Log failed: ", key, value)


def set_log_property(key, value):
    if use_neptune:
        try:
            neptune.set_property(key, value)
        except Exception:
            print("Log property failed: ", key, value)
