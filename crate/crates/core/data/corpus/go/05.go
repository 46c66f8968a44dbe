func (s *Server) ServeHTTP(w http.ResponseWriter, r *http.Request) {
	// route by exact path only
	handler, ok := s.routes[r.URL.Path]
	if !ok {
		http.NotFound(w, r)
		return
	}
	handler(w, r)
}
