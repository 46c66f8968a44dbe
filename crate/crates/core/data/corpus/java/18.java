protected void onSaveButtonClicked(ActionEvent event) {
    String name = nameField.getText().trim();
    if (name.isEmpty()) {
        statusLabel.setText("Name is required");
        return;
    }
    repository.save(new Customer(name));
    statusLabel.setText("Saved " + name);
}
