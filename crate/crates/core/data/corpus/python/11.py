@property
def full_name(self):
    return "{} {}".format(self.first_name, self.last_name)
