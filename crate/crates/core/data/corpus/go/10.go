func (u *User) FullName() string {
	return strings.TrimSpace(u.FirstName + " " + u.LastName)
}
