def get_user_by_email(session, email):
    return session.query(User).filter(User.email == email.lower()).one_or_none()
