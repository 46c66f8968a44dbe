public void writeProperties(Properties props, String fileName) throws IOException {
    try (OutputStream out = new FileOutputStream(fileName)) {
        props.store(out, "generated settings");
    } catch (FileNotFoundException e) {
        LOGGER.warning("cannot open " + fileName);
        throw e;
    }
}
