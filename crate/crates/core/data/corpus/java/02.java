public String readFileContents(String path) throws IOException {
    StringBuilder builder = new StringBuilder();
    try (BufferedReader reader = new BufferedReader(new FileReader(path))) {
        String line;
        while ((line = reader.readLine()) != null) {
            builder.append(line).append('\n');
        }
    }
    return builder.toString();
}
