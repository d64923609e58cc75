package store

type Saver interface {
    Save(key string, value []byte) error
}

var DefaultName = "store"
