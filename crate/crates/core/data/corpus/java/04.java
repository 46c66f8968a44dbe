public void copyStream(InputStream in, OutputStream out) throws IOException {
    byte[] buffer = new byte[8192];
    int count;
    while ((count = in.read(buffer)) > 0) {
        out.write(buffer, 0, count);
    }
    out.flush();
}
