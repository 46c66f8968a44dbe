module.exports = function readConfig(path) {
  // missing files fall back to defaults
  if (!fs.existsSync(path)) {
    return Object.assign({}, DEFAULTS);
  }
  return Object.assign({}, DEFAULTS, JSON.parse(fs.readFileSync(path, 'utf8')));
};
