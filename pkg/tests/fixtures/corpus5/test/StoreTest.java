package demo.test;

class StoreTest {
    void testSave() {
        saveFile("x");
        assertTrue(true);
    }
}
