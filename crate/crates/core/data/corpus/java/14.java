public void deleteDirectory(File dir) {
    File[] children = dir.listFiles();
    if (children != null) {
        for (File child : children) {
            deleteDirectory(child);
        }
    }
    dir.delete();
}
