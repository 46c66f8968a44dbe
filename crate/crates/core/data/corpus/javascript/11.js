Router.prototype.handle = function (req, res, next) {
  const route = this.match(req.method, req.url);
  if (!route) {
    return next();
  }
  route.handler(req, res, next);
};
