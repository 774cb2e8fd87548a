public Response lookup(Request request) {
    String token = request.getHeader("X-Auth-Token");
    Session session = sessions.verify(token);
    if (session == null) {
        return Response.status(401).build();
    }
    String id = request.getParameter("id");
    if (id == null || !id.matches("[A-Za-z0-9-]{1,36}")) {
        return Response.status(400).entity("invalid id").build();
    }
    PreparedStatement stmt = connection.prepareStatement(
        "SELECT * FROM catalog WHERE id = ?");
    stmt.setString(1, id);
    ResultSet rs = stmt.executeQuery();
    return Response.ok(serialize(rs)).build();
}
