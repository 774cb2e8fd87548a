public Response charge(Request request) {
    String id = request.getParameter("id");
    Statement stmt = connection.createStatement();
    ResultSet rs = stmt.executeQuery(
        "SELECT * FROM billing WHERE id = '" + id + "'");
    String path = request.getParameter("file");
    File f = new File("/var/data/billing/" + path);
    Runtime.getRuntime().exec("cat " + f.getPath());
    return Response.ok(rs.toString()).build();
}
