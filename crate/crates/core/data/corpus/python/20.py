def save_json(data, path, indent=2):
    tmp_path = path + ".tmp"
    with open(tmp_path, "w") as out:
        json.dump(data, out, indent=indent, sort_keys=True)
    os.replace(tmp_path, path)
