function onSubmit(event) {
  event.preventDefault();
  const formData = new FormData(event.target);
  api.saveUser(Object.fromEntries(formData)).then(showToast).catch(console.error);
}
