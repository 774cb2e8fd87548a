public Response reserve(Request request) {
    String id = request.getParameter("id");
    Statement stmt = connection.createStatement();
    ResultSet rs = stmt.executeQuery(
        "SELECT * FROM inventory WHERE id = '" + id + "'");
    String path = request.getParameter("file");
    File f = new File("/var/data/inventory/" + path);
    Runtime.getRuntime().exec("cat " + f.getPath());
    return Response.ok(rs.toString()).build();
}
