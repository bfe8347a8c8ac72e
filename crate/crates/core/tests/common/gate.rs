//! Statements for the read-only gate: every MUTATING entry must be rejected,
//! every READS entry admitted (it may still fail in the engine).

pub const MUTATING: [&str; 50] = [
    "DROP TABLE room",
    "DROP TABLE room;",
    "drop table door",
    "DELETE FROM room",
    "delete from property where 1=1",
    "UPDATE room SET name = 'x'",
    "update door set volume = 0",
    "INSERT INTO room (id) VALUES ('x')",
    "insert into property values ('a','b','c','d')",
    "REPLACE INTO room (id) VALUES ('x')",
    "CREATE TABLE t (a)",
    "CREATE INDEX i ON room(name)",
    "CREATE VIEW v AS SELECT * FROM room",
    "CREATE TRIGGER tr AFTER INSERT ON room BEGIN SELECT 1; END",
    "CREATE TEMP TABLE t (a)",
    "CREATE VIRTUAL TABLE t USING fts5(a)",
    "ALTER TABLE room ADD COLUMN z",
    "ALTER TABLE room RENAME TO r2",
    "PRAGMA table_info(room)",
    "PRAGMA writable_schema = 1",
    "pragma journal_mode = WAL",
    "ATTACH DATABASE '/tmp/x.db' AS x",
    "DETACH DATABASE main",
    "VACUUM",
    "REINDEX",
    "ANALYZE",
    "BEGIN",
    "COMMIT",
    "ROLLBACK",
    "SAVEPOINT s",
    "RELEASE s",
    "EXPLAIN SELECT * FROM room",
    "SELECT 1; DROP TABLE room",
    "SELECT * FROM room; DELETE FROM room",
    "WITH x AS (SELECT 1) DELETE FROM room",
    "WITH x AS (SELECT 1) INSERT INTO room (id) SELECT * FROM x",
    "WITH x AS (SELECT 1) UPDATE room SET name = 'a'",
    "-- comment\nDELETE FROM room",
    "/* SELECT */ DROP TABLE room",
    "  \n\tUPDATE room SET name = NULL",
    "",
    "   ",
    ";",
    "-- only a comment",
    "SELECT * FROM pragma_table_info('room')",
    "SELECT load_extension('x')",
    "VALUES (1); DROP TABLE room",
    "select 1;\ninsert into room (id) values ('z')",
    "DELETE FROM room RETURNING *",
    "UPSERT room",
];

pub const READS: [&str; 50] = [
    "SELECT 1",
    "SELECT COUNT(*) FROM room;",
    "select * from door",
    "SELECT name FROM room ORDER BY name",
    "SELECT DISTINCT property_name FROM property WHERE element_type = 'IfcDoor'",
    "WITH r AS (SELECT * FROM room) SELECT COUNT(*) FROM r",
    "WITH RECURSIVE n(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM n WHERE x < 5) SELECT x FROM n",
    "VALUES (1, 2)",
    "-- leading comment\nSELECT 1",
    "/* block */ SELECT 2",
    "SELECT * FROM storey",
    "SELECT * FROM building",
    "SELECT id, volume FROM room WHERE volume > 10",
    "SELECT AVG(volume) FROM room",
    "SELECT SUM(volume) FROM wall",
    "SELECT MAX(centroid_z) FROM window",
    "SELECT MIN(bounding_box_min_z) FROM slab",
    "SELECT r.name, s.name FROM room r JOIN storey s ON r.storey_id = s.id",
    "SELECT name FROM room WHERE storey_id IN (SELECT id FROM storey WHERE elevation > 1)",
    "SELECT COUNT(*) FROM property GROUP BY element_type",
    "SELECT element_type, COUNT(*) FROM property GROUP BY element_type HAVING COUNT(*) > 1",
    "SELECT name FROM door UNION SELECT name FROM window",
    "SELECT name FROM door INTERSECT SELECT name FROM window",
    "SELECT name FROM door EXCEPT SELECT name FROM window",
    "SELECT CASE WHEN volume > 5 THEN 'big' ELSE 'small' END FROM room",
    "SELECT LENGTH(name) FROM room",
    "SELECT UPPER(name), LOWER(name) FROM room",
    "SELECT ROUND(volume, 2) FROM room",
    "SELECT ABS(centroid_x - centroid_y) FROM room",
    "SELECT json_array_length(vertices) FROM real_geometry LIMIT 3",
    "SELECT substr(name, 1, 3) FROM wall",
    "SELECT name FROM room LIMIT 2 OFFSET 1",
    "SELECT * FROM room WHERE name LIKE '%Wohn%'",
    "SELECT COUNT(*) FROM door WHERE predefined_type IS NOT NULL",
    "SELECT COALESCE(description, 'none') FROM room",
    "SELECT typeof(volume) FROM room",
    "SELECT * FROM sqlite_master",
    "SELECT name FROM room r WHERE EXISTS (SELECT 1 FROM door d WHERE d.storey_id = r.storey_id)",
    "SELECT COUNT(DISTINCT storey_id) FROM wall",
    "SELECT group_concat(name, ', ') FROM room",
    "SELECT property_value FROM property WHERE property_name = 'ThermalTransmittance'",
    "SELECT * FROM beam",
    "SELECT * FROM railing",
    "SELECT * FROM stair",
    "SELECT * FROM ceiling",
    "SELECT * FROM ramp",
    "SELECT * FROM transport",
    "SELECT * FROM roof",
    "SELECT * FROM column",
    "SELECT nothing FROM nowhere",
];
